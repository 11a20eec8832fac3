def scale_to_real_height(obj, target_height_meters):
    """Uniformly scale an object so its world bounding-box height equals the target."""
    import bpy
    from mathutils import Vector

    if target_height_meters <= 0:
        raise ValueError(f"target height must be positive, got {target_height_meters}")
    bpy.context.view_layer.update()
    zs = []
    for o in [obj] + list(obj.children_recursive):
        if o.type in {"MESH", "CURVE", "SURFACE", "FONT", "META"}:
            zs.extend((o.matrix_world @ Vector(c)).z for c in o.bound_box)
    if not zs or max(zs) - min(zs) <= 0:
        raise ValueError(f"{obj.name} has zero height; cannot scale")
    factor = target_height_meters / (max(zs) - min(zs))
    obj.scale = [s * factor for s in obj.scale]
    bpy.context.view_layer.update()
