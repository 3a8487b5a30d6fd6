use cellshot::shooting::{shooting_fit, ShootingConfig};
use cellshot::{ls_fit, mm_fit, s_fit, FastSOptions, LinearFit, RegressionData, Result, RhoKind, RhoSpec};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn data(seed: u64) -> RegressionData {
    let (n, p) = (40, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        2.0 + x[(i, 0)] - 0.5 * x[(i, 1)] + 0.25 * x[(i, 2)] + 0.4 * e
    });
    RegressionData::new(x, y).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn check_baseline(fit: &dyn Fn(&RegressionData) -> Result<LinearFit>, tol: f64) {
    for seed in 0..4 {
        let d = data(seed);
        let base = fit(&d).unwrap();

        let (j, a) = (1, -6.0);
        let mut x = d.x.clone();
        x.column_mut(j).add_scalar_mut(a);
        let shifted = fit(&d.with_x(x)).unwrap();
        for k in 0..3 {
            assert!(close(shifted.slopes[k], base.slopes[k], tol), "slope {k}: {} vs {}", shifted.slopes[k], base.slopes[k]);
        }
        assert!(close(shifted.intercept, base.intercept - a * base.slopes[j], tol), "seed {seed}: {} vs {}", shifted.intercept, base.intercept - a * base.slopes[j]);

        let c = -3.0;
        let scaled = fit(&d.with_y(&d.y * c)).unwrap();
        for k in 0..3 {
            assert!(close(scaled.slopes[k], c * base.slopes[k], tol));
        }
        assert!(close(scaled.intercept, c * base.intercept, tol));
        assert!(close(scaled.scale, c.abs() * base.scale, tol));
    }
}

#[test]
fn least_squares_equivariance() {
    check_baseline(&ls_fit, 1e-8);
}

#[test]
fn s_and_mm_equivariance() {
    let opts = FastSOptions { n_subsamples: 100, ..FastSOptions::with_seed(12) };
    let spec = RhoSpec::biweight(3.42).unwrap();
    check_baseline(&|d| s_fit(d, &spec, &opts), 1e-6);
    check_baseline(&|d| mm_fit(d, RhoKind::Biweight, 0.5, 0.95, &opts), 1e-6);
}

#[test]
fn shooting_scale_equivariance() {
    for (config, seed) in [(ShootingConfig::biweight(), 1), (ShootingConfig::skipped_huber(), 2)] {
        let d = data(seed);
        let base = shooting_fit(&d, &config).unwrap();
        let c = 2.5;
        let scaled = shooting_fit(&d.with_y(&d.y * c), &config).unwrap();
        for k in 0..3 {
            assert!(close(scaled.slopes[k], c * base.slopes[k], 1e-6));
            assert!(close(scaled.scales[k], c * base.scales[k], 1e-6));
        }
        assert!(close(scaled.intercept, c * base.intercept, 1e-6));
        assert_eq!(scaled.weights, base.weights);
    }
}
