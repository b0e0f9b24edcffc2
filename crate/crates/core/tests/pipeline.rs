use hsinv::distributions::{delta_coefficients, translated_delta};
use hsinv::geometry::{LevelSetManifold, SphericalChart};
use hsinv::hermite::Projector;
use hsinv::invariance::{check_chart, check_levelset, overall_verdict, SdeFields, Verdict};
use hsinv::operators::translation_operator;
use hsinv::sde::{coupled_increments, euler_maruyama_with_increments, StroockSphere};
use hsinv::spde::{compare_trajectories, gaussian_profile_model, SpdeTrajectory};
use hsinv::TruncationScheme;
use proptest::prelude::*;

#[test]
fn spde_trajectory_survives_a_file_round_trip() {
    let m = gaussian_profile_model(20).unwrap();
    let inc = coupled_increments(4, 20, 1, 0.05);
    let y = m.translated_profile_solution(&[0.2], 0.05, &inc).unwrap().with_seed(4);
    let dir = std::env::temp_dir().join(format!("hsinv-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("profile.json");
    std::fs::write(&path, y.to_json().unwrap()).unwrap();
    let back = SpdeTrajectory::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back, y);
    assert!(compare_trajectories(&y, &back, 0.0).unwrap().iter().all(|(_, d)| *d == 0.0));
}

#[test]
fn stroock_paths_stay_near_the_sphere_and_the_checker_agrees() {
    let model = StroockSphere::new(3).unwrap();
    let sphere = LevelSetManifold::unit_sphere(3).unwrap();
    let inc = coupled_increments(11, 2000, 3, 5e-4);
    let states = euler_maruyama_with_increments(&model, &[0.0, 0.0, 1.0], 5e-4, &inc).unwrap();
    let worst = states.iter().map(|x| sphere.value(x)[0].abs()).fold(0.0, f64::max);
    assert!(worst < 0.2, "drifted {worst}");
    let sample = sphere.sample(40, 3);
    let verdict = overall_verdict(&check_levelset(&model, &sphere, &sample, 1e-8).unwrap());
    assert_eq!(verdict, Verdict::Pass);
}

#[test]
fn chart_lift_recovers_the_local_generator_on_the_sphere() {
    // on S² the Stroock model is Brownian motion, whose drift in (θ, ϕ) is (½ cot θ, 0)
    let model = StroockSphere::new(3).unwrap();
    let points = vec![vec![0.7, 0.3], vec![1.2, 2.0], vec![2.1, -1.0]];
    let check = check_chart(&SdeFields(&model), &SphericalChart::default(), &points, 1e-10).unwrap();
    for (x, ell) in points.iter().zip(&check.local_drift) {
        assert!((ell[0] - 0.5 / x[0].tan()).abs() < 1e-12);
        assert!(ell[1].abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translation_composes(x in -0.4f64..0.4, y in -0.4f64..0.4) {
        let s = TruncationScheme::new(1, 50).unwrap();
        let v = Projector::for_scheme(s).unwrap().project(|t| (-t[0] * t[0] / 2.0).exp()).unwrap();
        let lhs = translation_operator(&[x], &s).unwrap()
            .apply(&translation_operator(&[y], &s).unwrap().apply(&v).unwrap()).unwrap();
        let rhs = translation_operator(&[x + y], &s).unwrap().apply(&v).unwrap();
        prop_assert!(lhs.distance_p(&rhs, 0.0).unwrap() < 1e-8);
    }

    #[test]
    fn delta_shift_matches_exact_evaluation(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let s = TruncationScheme::new(1, 30).unwrap();
        let direct = translated_delta(&[a], &[b], &s).unwrap();
        let exact = delta_coefficients(&[a + b], &s).unwrap();
        prop_assert!(direct.distance_p(&exact, -1.0).unwrap() < 1e-14);
    }
}
