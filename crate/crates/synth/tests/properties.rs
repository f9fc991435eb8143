use proptest::prelude::*;

use semgrid_synth::{generate_scene, SceneParams, SplitMode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_scenes_are_valid_and_reproducible(seed: u64) {
        let params = SceneParams::default();
        let spec = generate_scene(&params, seed);
        prop_assert!(spec.validate().is_ok());
        prop_assert_eq!(&spec, &generate_scene(&params, seed));
        prop_assert!(spec.ego.speed == 0.0 || (params.ego_speed[0]..=params.ego_speed[1]).contains(&spec.ego.speed));
        for o in &spec.objects {
            prop_assert!(o.width > 0.0 && o.length > 0.0 && o.height > 0.0);
        }
    }

    #[test]
    fn split_crops_are_disjoint_and_in_bounds(width in 1usize..700, height in 1usize..400) {
        for mode in [SplitMode::One, SplitMode::Two] {
            let crops = mode.crops(width, height);
            prop_assert_eq!(crops.len(), mode.n_sensors());
            let [lower, upper] = [crops[0].unwrap(), crops[1].unwrap()];
            for c in [lower, upper] {
                prop_assert!(c.u_min <= c.u_max && c.u_max <= width && c.v_min <= c.v_max && c.v_max <= height);
            }
            prop_assert!(upper.v_max <= lower.v_min);
        }
        prop_assert_eq!(SplitMode::None.crops(width, height), vec![None]);
    }
}
