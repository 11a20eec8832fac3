def animate_camera(waypoints):
    """Keyframe the scene camera through (frame, location, look_at) waypoints."""
    import bpy
    from mathutils import Vector

    cam = bpy.context.scene.camera
    if cam is None:
        raise RuntimeError("animate_camera needs a camera; call place_camera first")
    for frame, location, look_at in waypoints:
        cam.location = Vector(location)
        cam.rotation_euler = (Vector(look_at) - cam.location).to_track_quat("-Z", "Y").to_euler()
        cam.keyframe_insert(data_path="location", frame=frame)
        cam.keyframe_insert(data_path="rotation_euler", frame=frame)
    scene = bpy.context.scene
    scene.frame_end = max(scene.frame_end, max(int(w[0]) for w in waypoints))
