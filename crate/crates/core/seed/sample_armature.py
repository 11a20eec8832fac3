def sample_armature(armature, frames):
    """Return the world-space root coordinates [x, y, z] of an armature at each listed frame."""
    import bpy

    scene = bpy.context.scene
    coords = []
    for frame in frames:
        clamped = min(max(int(frame), scene.frame_start), scene.frame_end)
        scene.frame_set(clamped)
        root = armature.pose.bones[0] if armature.type == "ARMATURE" and armature.pose.bones else None
        point = armature.matrix_world @ root.head if root is not None else armature.matrix_world.translation
        coords.append([round(point.x, 6), round(point.y, 6), round(point.z, 6)])
    return coords
