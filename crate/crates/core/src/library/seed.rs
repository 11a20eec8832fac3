use super::{FunctionLibrary, LibraryFunction, Provenance};

pub const SEED_FUNCTION_NAMES: [&str; 10] = [
    "animate_camera",
    "assign_motion",
    "import_asset",
    "place_camera",
    "place_object",
    "render_keyframes",
    "rotate_to_face",
    "sample_armature",
    "scale_to_real_height",
    "set_lighting",
];

// (body, one-line purpose, [(param, semantic type, units)])
type SeedDef = (&'static str, &'static str, &'static [(&'static str, &'static str, Option<&'static str>)]);

const SEEDS: [SeedDef; 10] = [
    (
        include_str!("../../seed/animate_camera.py"),
        "Keyframe the scene camera through (frame, location, look_at) waypoints.",
        &[("waypoints", "list[(frame, vec3, vec3)]", Some("m"))],
    ),
    (
        include_str!("../../seed/assign_motion.py"),
        "Play a motion clip on an armature between two frames, moving its root from start_point to end_point.",
        &[
            ("armature", "object", None),
            ("motion_clip", "path", None),
            ("start_frame", "int", Some("frame")),
            ("end_frame", "int", Some("frame")),
            ("start_point", "vec3", Some("m")),
            ("end_point", "vec3", Some("m")),
        ],
    ),
    (
        include_str!("../../seed/import_asset.py"),
        "Import a 3D asset file and return its root object.",
        &[("path", "path", None)],
    ),
    (
        include_str!("../../seed/place_camera.py"),
        "Create the scene camera at a location aimed at a point.",
        &[("location", "vec3", Some("m")), ("look_at", "vec3", Some("m")), ("fov_degrees", "float", Some("deg"))],
    ),
    (
        include_str!("../../seed/place_object.py"),
        "Move an object to a world location.",
        &[("obj", "object", None), ("location", "vec3", Some("m"))],
    ),
    (
        include_str!("../../seed/render_keyframes.py"),
        "Render one PNG still per listed frame and return the paths.",
        &[("frames", "list[int]", Some("frame")), ("out_dir", "path", None)],
    ),
    (
        include_str!("../../seed/rotate_to_face.py"),
        "Yaw an object in the XY-plane so it faces a 3D point.",
        &[("obj", "object", None), ("target_point", "vec3", Some("m"))],
    ),
    (
        include_str!("../../seed/sample_armature.py"),
        "Return world root coordinates of an armature at each listed frame.",
        &[("armature", "object", None), ("frames", "list[int]", Some("frame"))],
    ),
    (
        include_str!("../../seed/scale_to_real_height.py"),
        "Uniformly scale an object to a real-world height.",
        &[("obj", "object", None), ("target_height_meters", "float", Some("m"))],
    ),
    (
        include_str!("../../seed/set_lighting.py"),
        "Light the scene with a named preset (daylight, sunset, night, overcast, studio).",
        &[("preset", "str", None)],
    ),
];

/// The hand-written starting library every base library descends from.
pub fn seed_library() -> FunctionLibrary {
    let functions = SEEDS.iter().map(|(body, doc, types)| {
        types.iter().fold(
            LibraryFunction::from_body(*body, *doc, Provenance::Seed).expect("seed bodies parse"),
            |f, (param, ty, units)| f.typed(param, ty, *units),
        )
    });
    FunctionLibrary::from_parts("seed".into(), 1, None, functions).expect("seed library is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_contents() {
        let lib = seed_library();
        let names: Vec<_> = lib.functions().map(|f| f.name.as_str()).collect();
        assert_eq!(names, SEED_FUNCTION_NAMES);
        assert!(lib.functions().all(|f| f.version == 1 && f.provenance == Provenance::Seed));
        assert_eq!(lib.get("import_asset").unwrap().provenance, Provenance::Seed);
        assert!(lib.functions().all(|f| f.params.iter().all(|p| p.semantic_type != "any")));
    }

    #[test]
    fn prelude_is_sorted_and_unique() {
        let lib = seed_library();
        let prelude = lib.emit_prelude();
        let mut last = 0;
        for name in SEED_FUNCTION_NAMES {
            let needle = format!("\ndef {name}(");
            assert_eq!(prelude.matches(&needle).count(), 1, "{name}");
            let at = prelude.find(&needle).unwrap();
            assert!(at > last);
            last = at;
        }
        assert_eq!(prelude, seed_library().emit_prelude());
    }
}
