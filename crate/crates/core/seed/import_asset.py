def import_asset(path):
    """Import a 3D asset file (.obj, .fbx, .glb/.gltf, .blend) and return its root object."""
    import os
    import bpy

    if not os.path.exists(path):
        raise FileNotFoundError(f"asset file not found: {path}")
    ext = os.path.splitext(path)[1].lower()
    before = set(bpy.data.objects)
    if ext == ".obj":
        bpy.ops.wm.obj_import(filepath=path)
    elif ext == ".fbx":
        bpy.ops.import_scene.fbx(filepath=path)
    elif ext in (".glb", ".gltf"):
        bpy.ops.import_scene.gltf(filepath=path)
    elif ext == ".blend":
        with bpy.data.libraries.load(path) as (src, dst):
            dst.objects = list(src.objects)
        for obj in dst.objects:
            if obj is not None:
                bpy.context.scene.collection.objects.link(obj)
    else:
        raise ValueError(f"unsupported asset extension {ext!r} for {path}")
    new = [o for o in bpy.data.objects if o not in before]
    if not new:
        raise RuntimeError(f"no objects were imported from {path}")
    roots = [o for o in new if o.parent is None or o.parent not in new]
    if len(roots) == 1:
        root = roots[0]
    else:
        root = bpy.data.objects.new(os.path.basename(path), None)
        bpy.context.scene.collection.objects.link(root)
        for o in roots:
            o.parent = root
    root.location = (0.0, 0.0, 0.0)
    return root
