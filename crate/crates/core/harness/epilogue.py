def _clapper_harness():
    import json
    import os
    import bpy

    mode = os.environ.get("CLAPPER_MODE", "preview")
    out_dir = os.environ["CLAPPER_OUTPUT_DIR"]
    manifest_path = os.environ["CLAPPER_MANIFEST"]
    width, height = (int(v) for v in os.environ.get("CLAPPER_RESOLUTION", "512x288").split("x"))
    scene = bpy.context.scene
    scene.render.resolution_x = width
    scene.render.resolution_y = height
    scene.render.resolution_percentage = 100
    warnings = []
    if scene.camera is None:
        cams = [o for o in scene.objects if o.type == "CAMERA"]
        if cams:
            scene.camera = cams[0]
        else:
            warnings.append("no camera in scene; added a default one")
            bpy.ops.object.camera_add(location=(0.0, -10.0, 2.0), rotation=(1.4, 0.0, 0.0))
            scene.camera = bpy.context.active_object

    def armature_for(label):
        obj = bpy.data.objects.get(label)
        if obj is not None:
            return obj
        rigs = [o for o in scene.objects if o.type == "ARMATURE"]
        if not rigs:
            return None
        if len(rigs) > 1:
            warnings.append("probe `%s` has no object of that name; using `%s`" % (label, rigs[0].name))
        return rigs[0]

    def location_at(obj, frame):
        scene.frame_set(frame)
        return [float(v) for v in obj.matrix_world.translation]

    if mode == "final":
        fps = int(os.environ.get("CLAPPER_FPS", "24"))
        frame_count = int(os.environ["CLAPPER_FRAME_COUNT"])
        video = os.environ["CLAPPER_VIDEO"]
        scene.render.fps = fps
        scene.frame_start = 1
        scene.frame_end = frame_count
        scene.render.image_settings.file_format = "FFMPEG"
        scene.render.ffmpeg.format = "MPEG4"
        scene.render.ffmpeg.codec = "H264"
        scene.render.filepath = video
        bpy.ops.render.render(animation=True)
        manifest = {
            "frames": [],
            "coordinates": [],
            "warnings": warnings,
            "video": {"path": video, "frame_count": frame_count, "fps": fps, "resolution": [width, height]},
        }
    else:
        with open(os.environ["CLAPPER_PLAN"]) as f:
            plan = json.load(f)
        frames = []
        for frame in plan["keyframe_frames"]:
            scene.frame_set(frame)
            path = os.path.join(out_dir, "frame_%04d.png" % frame)
            scene.render.image_settings.file_format = "PNG"
            scene.render.filepath = path
            bpy.ops.render.render(write_still=True)
            frames.append(path)
        coordinates = []
        for probe in plan["coordinate_probes"]:
            obj = armature_for(probe["label"])
            if obj is None:
                raise RuntimeError("no armature to sample for motion `%s`" % probe["label"])
            coordinates.append({
                "label": probe["label"],
                "start": location_at(obj, probe["start_frame"]),
                "end": location_at(obj, probe["end_frame"]),
            })
        manifest = {"frames": frames, "coordinates": coordinates, "warnings": warnings}

    with open(manifest_path, "w") as f:
        json.dump(manifest, f)


_clapper_harness()
