def set_lighting(preset):
    """Light the scene with a named preset: daylight, sunset, night, overcast or studio."""
    import math
    import bpy

    presets = {
        "daylight": ((1.0, 0.98, 0.95), 4.0, 50.0, (0.6, 0.75, 1.0), 1.0),
        "sunset": ((1.0, 0.6, 0.35), 2.5, 8.0, (0.9, 0.55, 0.4), 0.6),
        "night": ((0.55, 0.65, 1.0), 0.3, 35.0, (0.02, 0.03, 0.08), 0.2),
        "overcast": ((0.9, 0.92, 0.95), 1.2, 60.0, (0.7, 0.72, 0.75), 1.2),
        "studio": ((1.0, 1.0, 1.0), 3.0, 45.0, (0.2, 0.2, 0.2), 0.5),
    }
    key = str(preset).lower()
    if key not in presets:
        raise ValueError(f"unknown lighting preset {preset!r}; choose one of {sorted(presets)}")
    color, strength, elevation, world_color, world_strength = presets[key]
    for o in [o for o in bpy.data.objects if o.type == "LIGHT"]:
        bpy.data.objects.remove(o, do_unlink=True)
    sun_data = bpy.data.lights.new("KeySun", type="SUN")
    sun_data.color = color
    sun_data.energy = strength
    sun = bpy.data.objects.new("KeySun", sun_data)
    sun.rotation_euler = (math.radians(90.0 - elevation), 0.0, math.radians(35.0))
    bpy.context.scene.collection.objects.link(sun)
    world = bpy.context.scene.world or bpy.data.worlds.new("World")
    bpy.context.scene.world = world
    world.use_nodes = True
    bg = world.node_tree.nodes.get("Background")
    bg.inputs[0].default_value = (*world_color, 1.0)
    bg.inputs[1].default_value = world_strength
    return sun
