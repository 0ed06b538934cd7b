use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spoken2sign::fitter::{fit_frame, FitConfig, SharedCalibration};
use spoken2sign::objective::{total_objective, FrameObservation};
use spoken2sign::skeleton::{forward_kinematics, project, CameraParams, KinematicTree, PoseParams};

fn main() {
    let tree = KinematicTree::signer54();
    let cam = CameraParams::frontal(1000.0, [500.0, 500.0], 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut truth = PoseParams::rest(&tree);
    for &j in &[15usize, 16, 17, 18, 19, 20, 21] {
        for c in 0..3 {
            truth.theta[3 * j + c] = rng.random_range(-0.5..0.5);
        }
    }
    for j in 24..54 {
        for c in 0..3 {
            truth.theta[3 * j + c] = rng.random_range(-0.4..0.4);
        }
    }
    let joints = forward_kinematics(&tree, &truth, &cam).unwrap();
    let kps = project(&joints, &cam).unwrap();
    let obs = FrameObservation::from_keypoints(kps.clone(), 0.65);
    let shared = SharedCalibration {
        beta: truth.beta,
        zeta: truth.zeta,
        camera: cam.clone(),
    };
    let cfg = FitConfig::default();

    let eval = |pose: &PoseParams, label: &str| {
        let (v, g) = total_objective(pose, &tree, &cam, &obs, &cfg.weights, &cfg.robust).unwrap();
        let gnorm: f64 = g
            .pose
            .theta
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let joints = forward_kinematics(&tree, pose, &cam).unwrap();
        let proj = project(&joints, &cam).unwrap();
        let mut err = 0.0;
        for (a, b) in proj.coords.iter().zip(&kps.coords) {
            err += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        }
        err /= proj.coords.len() as f64;
        println!("{label}: value={v:.6e} theta_grad_norm={gnorm:.4e} reproj={err:.4}px");
    };

    let rest = PoseParams::rest(&tree);
    eval(&truth, "truth");
    eval(&rest, "rest ");
    let fitted = fit_frame(&obs, &shared, &tree, &cfg).unwrap();
    eval(&fitted, "fit  ");

    // per-stage progress with larger budgets
    let mut cfg2 = FitConfig::default();
    for s in cfg2.schedule.stages.iter_mut() {
        s.iters *= 4;
    }
    let fitted2 = fit_frame(&obs, &shared, &tree, &cfg2).unwrap();
    eval(&fitted2, "fit4x");

    // raw lbfgs over all theta at once
    use spoken2sign::fitter::{lbfgs_minimize, LbfgsConfig};
    let mut pose = PoseParams::rest(&tree);
    pose.zeta = shared.zeta;
    pose.beta = shared.beta;
    let x0: Vec<f64> = pose.theta.clone();
    let mut scratch = pose.clone();
    let objective = |x: &[f64]| {
        scratch.theta.copy_from_slice(x);
        match total_objective(&scratch, &tree, &cam, &obs, &cfg.weights, &cfg.robust) {
            Ok((v, g)) => (v, g.pose.theta),
            Err(_) => (f64::INFINITY, vec![0.0; x.len()]),
        }
    };
    let res = lbfgs_minimize(
        objective,
        &x0,
        &LbfgsConfig {
            max_iters: 2000,
            ..LbfgsConfig::default()
        },
    )
    .unwrap();
    println!(
        "raw lbfgs: iters={} accepted={} final={:.6e}",
        res.iterations,
        res.trace.len() - 1,
        res.value
    );
    pose.theta.copy_from_slice(&res.x);
    eval(&pose, "raw  ");
}
