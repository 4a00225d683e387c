use proptest::prelude::*;

use markernav_core::angle;
use markernav_core::eval;
use markernav_core::geometry::Pose2D;
use markernav_core::navigation::maneuver;

fn pose() -> impl Strategy<Value = Pose2D> {
    (-50.0..50.0f64, -50.0..50.0f64, -3.14..3.14f64).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
}

proptest! {
    #[test]
    fn maneuver_lands_on_destination(s in pose(), d in pose()) {
        let m = maneuver(&s, &d);
        let end = m.apply(&s);
        prop_assert!(m.translate >= 0.0);
        prop_assert!(m.rotate_first.abs() <= std::f64::consts::PI + 1e-12);
        prop_assert!((end.x - d.x).abs() < 1e-9 && (end.y - d.y).abs() < 1e-9);
        prop_assert!(angle::diff(end.theta, d.theta).abs() < 1e-9);
    }

    #[test]
    fn nearest_neighbour_metrics_ignore_point_order(
        a in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 1..60),
        b in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 1..60),
        shift in 0usize..60,
    ) {
        let mut a2 = a.clone();
        let k = shift % a2.len();
        a2.rotate_left(k);
        let mut b2 = b.clone();
        b2.reverse();
        let (x, y) = (eval::adnn(&a, &b).unwrap(), eval::adnn(&a2, &b2).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        let (x, y) = (eval::rmse(&a, &b).unwrap(), eval::rmse(&a2, &b2).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        // Nearest distances are a lower bound on any pairing.
        prop_assert!(eval::adnn(&a, &b).unwrap() <= eval::rmse(&a, &b).unwrap() + 1e-12);
    }
}
