def place_camera(location, look_at, fov_degrees=50.0):
    """Create the scene camera at a location, aimed at a point, with a horizontal field of view in degrees."""
    import math
    import bpy
    from mathutils import Vector

    cam_data = bpy.data.cameras.new("ShotCamera")
    cam_data.lens_unit = "FOV"
    cam_data.angle = math.radians(float(fov_degrees))
    cam = bpy.data.objects.new("ShotCamera", cam_data)
    bpy.context.scene.collection.objects.link(cam)
    cam.location = Vector(location)
    direction = Vector(look_at) - cam.location
    cam.rotation_euler = direction.to_track_quat("-Z", "Y").to_euler()
    bpy.context.scene.camera = cam
    return cam
