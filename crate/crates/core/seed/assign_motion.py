def assign_motion(armature, motion_clip, start_frame, end_frame, start_point, end_point):
    """Play a motion clip on an armature between two frames while moving its root linearly from start_point to end_point."""
    import bpy

    before = set(bpy.data.actions)
    bpy.ops.import_scene.fbx(filepath=motion_clip, use_anim=True)
    actions = [a for a in bpy.data.actions if a not in before]
    for o in list(bpy.context.selected_objects):
        if o is not armature:
            bpy.data.objects.remove(o, do_unlink=True)
    if not actions:
        raise RuntimeError(f"motion clip {motion_clip} contains no animation")
    action = actions[0]
    if armature.animation_data is None:
        armature.animation_data_create()
    track = armature.animation_data.nla_tracks.new()
    strip = track.strips.new(action.name, int(start_frame), action)
    strip.frame_end = float(end_frame)
    strip.extrapolation = "NOTHING"
    if start_point is not None and end_point is not None:
        armature.location = tuple(start_point)
        armature.keyframe_insert(data_path="location", frame=start_frame)
        armature.location = tuple(end_point)
        armature.keyframe_insert(data_path="location", frame=end_frame)
        for fc in armature.animation_data.action.fcurves:
            for kp in fc.keyframe_points:
                kp.interpolation = "LINEAR"
    scene = bpy.context.scene
    scene.frame_end = max(scene.frame_end, int(end_frame))
