def render_keyframes(frames, out_dir):
    """Render one PNG still per listed frame into out_dir and return the image paths."""
    import os
    import bpy

    scene = bpy.context.scene
    os.makedirs(out_dir, exist_ok=True)
    scene.render.image_settings.file_format = "PNG"
    paths = []
    for i, frame in enumerate(frames):
        clamped = min(max(int(frame), scene.frame_start), scene.frame_end)
        if clamped != frame:
            print(f"WARNING: keyframe {frame} outside {scene.frame_start}..{scene.frame_end}; clamped to {clamped}")
        scene.frame_set(clamped)
        path = os.path.join(out_dir, f"frame_{i:03d}_{clamped:05d}.png")
        scene.render.filepath = path
        bpy.ops.render.render(write_still=True)
        paths.append(path)
    return paths
