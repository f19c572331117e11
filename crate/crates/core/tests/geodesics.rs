use confmetric::path_metrics::{
    ferrand_distance, quasihyperbolic_distance, Density, GeodesicSolver, GridOptions, Stencil,
};
use confmetric::point_metrics::{delta_metric, hyperbolic_disk, hyperbolic_halfplane, j_metric};
use confmetric::{DomainSpec, ExtendedPoint};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(re: f64, im: f64) -> ExtendedPoint {
    ExtendedPoint::xy(re, im)
}

#[test]
fn richardson_order_on_disk_and_half_plane() {
    let disk = DomainSpec::unit_disk();
    let hp = DomainSpec::half_plane();
    let (x, y) = (p(0.3, -0.6), p(-0.5, 0.4));
    let (u, v) = (p(-1.0, 0.5), p(1.5, 2.0));
    let exact_disk = hyperbolic_disk(x, y).unwrap().value;
    let exact_hp = hyperbolic_halfplane(u, v).unwrap().value;
    let mut disk_err = Vec::new();
    let mut hp_err = Vec::new();
    for h in [0.04, 0.02, 0.01] {
        disk_err.push((ferrand_distance(&disk, x, y, h).unwrap().distance - exact_disk).abs());
        hp_err.push((quasihyperbolic_distance(&hp, u, v, h).unwrap().distance - exact_hp).abs());
    }
    for errs in [disk_err, hp_err] {
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 >= 1.0 && order2 >= 1.0, "{errs:?}");
    }
}

#[test]
fn refinement_stays_within_reported_bias() {
    let ann = DomainSpec::annulus(1.0, 2.0).unwrap();
    let (x, y) = (p(1.2, 0.4), p(-1.6, -0.2));
    let coarse = quasihyperbolic_distance(&ann, x, y, 0.04).unwrap();
    let fine = quasihyperbolic_distance(&ann, x, y, 0.02).unwrap();
    assert!(fine.distance <= coarse.distance + coarse.upper_bias + fine.upper_bias);
    assert!(coarse.distance <= fine.distance + coarse.upper_bias + fine.upper_bias);
}

#[test]
fn path_endpoints_are_query_points() {
    let disk = DomainSpec::unit_disk();
    let (x, y) = (p(0.1, 0.2), p(-0.4, -0.3));
    let r = quasihyperbolic_distance(&disk, x, y, 0.02).unwrap();
    assert!(r.path.first().unwrap().approx_eq(&x));
    assert!(r.path.last().unwrap().approx_eq(&y));
    assert!(r.snap_offset <= 2.0 * 0.02 * 2f64.sqrt());
}

#[test]
fn sandwiches_on_random_disk_pairs() {
    let disk = DomainSpec::unit_disk();
    let options = GridOptions::auto(&disk, &[Complex64::new(0.0, 0.0)], 0.02, Stencil::Sixteen);
    let k_solver = GeodesicSolver::new(&disk, options, Density::Quasihyperbolic).unwrap();
    let s_solver = GeodesicSolver::new(&disk, options, Density::Ferrand).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let mut draw = || Complex64::from_polar(0.85 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
        let (x, y): (ExtendedPoint, ExtendedPoint) = (draw().into(), draw().into());
        let k = k_solver.distance(x, y).unwrap();
        let s = s_solver.distance(x, y).unwrap();
        let d = delta_metric(&disk, x, y).unwrap();
        let j = j_metric(&disk, x, y).unwrap().value;
        let tol = k.upper_bias + s.upper_bias + d.error_bound + 1e-9;
        assert!(j <= k.distance + tol);
        assert!(k.distance <= s.distance + tol);
        assert!(s.distance <= 2.0 * k.distance + tol);
        assert!(d.value <= s.distance + tol);
        let (lhs, rhs) = ((1.0 + d.value).ln(), (1.0 + s.distance).ln());
        assert!(lhs <= rhs + tol);
    }
}
