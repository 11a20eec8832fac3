def rotate_to_face(obj, target_point):
    """Yaw an object in the XY-plane so its +Y axis faces a 3D point."""
    import math

    dx = target_point[0] - obj.location.x
    dy = target_point[1] - obj.location.y
    if abs(dx) < 1e-9 and abs(dy) < 1e-9:
        print(f"WARNING: rotate_to_face target is above or below {obj.name}; rotation unchanged")
        return
    obj.rotation_mode = "XYZ"
    obj.rotation_euler.z = math.atan2(-dx, dy)
