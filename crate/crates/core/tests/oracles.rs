use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use markernav_core::geometry::{Marker, MarkerDatabase, Pose2D};
use markernav_core::morphology::{count_components, label_components, thin};
use markernav_core::navigation::{nearest_marker, switch_decision};
use markernav_core::raster::{BitGrid, Grid};

fn random_db(rng: &mut ChaCha8Rng, n: usize) -> MarkerDatabase {
    let markers = (0..n).map(|i| {
        // Coarse coordinates so exact distance ties actually occur.
        let (x, y) = (f64::from(rng.random_range(0..6)), f64::from(rng.random_range(0..6)));
        Marker::new(i as u32 * 3 + 1, Pose2D::new(x, y, 0.0), 4, 0.2).unwrap()
    });
    MarkerDatabase::new(markers).unwrap()
}

#[test]
fn nearest_marker_matches_exhaustive_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let n = rng.random_range(1..9);
        let db = random_db(&mut rng, n);
        let (x, y) = (f64::from(rng.random_range(0..6)), f64::from(rng.random_range(0..6)));
        let mut ranked: Vec<(f64, u32)> = db.iter().map(|m| ((m.pose.x - x).powi(2) + (m.pose.y - y).powi(2), m.id)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(nearest_marker(x, y, &db).unwrap(), ranked[0].1);
    }
}

#[test]
fn switching_needs_the_full_margin() {
    let db = MarkerDatabase::new([
        Marker::new(1, Pose2D::new(0.0, 0.0, 0.0), 4, 0.2).unwrap(),
        Marker::new(2, Pose2D::new(4.0, 0.0, 0.0), 4, 0.2).unwrap(),
    ])
    .unwrap();
    // Distances 2.1 vs 1.9: 0.2 closer, exactly the margin.
    assert_eq!(switch_decision(1, &Pose2D::new(2.1, 0.0, 0.0), &db, 0.2).unwrap(), 2);
    assert_eq!(switch_decision(1, &Pose2D::new(2.05, 0.0, 0.0), &db, 0.2).unwrap(), 1);
    assert_eq!(switch_decision(2, &Pose2D::new(2.05, 0.0, 0.0), &db, 0.2).unwrap(), 2);
}

/// Union-find over 8-neighbour links, independent of the flood fill.
fn components_by_union(g: &BitGrid) -> Vec<usize> {
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    let (w, h) = (g.width(), g.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            if !*g.get(x, y) {
                continue;
            }
            for (dx, dy) in [(1i64, 0i64), (0, 1), (1, 1), (-1, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if g.in_bounds(nx, ny) && *g.get(nx as usize, ny as usize) {
                    let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, ny as usize * w + nx as usize));
                    parent[a] = b;
                }
            }
        }
    }
    (0..w * h).map(|i| find(&mut parent, i)).collect()
}

#[test]
fn labels_agree_with_union_find_and_thinning_keeps_topology() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let (w, h) = (rng.random_range(3..30), rng.random_range(3..30));
        let density = rng.random_range(0.2..0.7);
        let g: BitGrid = Grid::from_fn(w, h, |_, _| rng.random_bool(density));
        let (labels, n) = label_components(&g);
        let roots = components_by_union(&g);
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                if g.data()[i] && g.data()[j] {
                    assert_eq!(labels.data()[i] == labels.data()[j], roots[i] == roots[j]);
                }
            }
            assert_eq!(labels.data()[i] == u32::MAX, !g.data()[i]);
        }
        let distinct: std::collections::BTreeSet<usize> = (0..g.len()).filter(|&i| g.data()[i]).map(|i| roots[i]).collect();
        assert_eq!(n as usize, distinct.len());

        let t = thin(&g);
        assert!(t.data().iter().zip(g.data()).all(|(&a, &b)| !a || b));
        assert_eq!(count_components(&t), n);
    }
}
