mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::metrics_oracle::{self as oracle, BoxGrid, Instance};
use tractoformer::metrics::{classify_connections, coverage_scores, voxelize};
use tractoformer::streamlines::Streamline;

#[test]
fn randomized_instances_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..300 {
        let inst = Instance::random(&mut rng);
        let step = inst.grid.size * 0.5;
        let rec = voxelize(&inst.streamlines, &inst.grid.grid(), step);
        let want = oracle::voxel_set(&inst.grid, &inst.streamlines, step);
        assert_eq!(oracle::mask_set(&rec), want, "case {case}");

        let cov = coverage_scores(&rec, &inst.to_mask(&inst.gt)).unwrap();
        assert_eq!((cov.dice, cov.overlap, cov.overreach), oracle::coverage(&want, &inst.gt), "case {case}");

        let summary = classify_connections(&inst.tractogram(), &inst.roi_set()).unwrap();
        for (s, got) in inst.streamlines.iter().zip(&summary.assignment) {
            assert_eq!(*got, oracle::classify(&inst.grid, &inst.rois, &inst.pairs, s), "case {case}");
        }
        assert!((summary.vc + summary.ic + summary.nc - 100.0).abs() < 1e-9);
    }
}

#[test]
fn straight_line_voxel_counts() {
    let g = BoxGrid { dims: [14, 3, 3], size: 1.0, origin: [0.0; 3] };
    for (x0, x1, expected) in [(0.0, 10.0, 11), (0.2, 10.2, 11), (-0.5, 9.5, 11), (-0.45, 9.45, 10)] {
        let s = Streamline::new(vec![[x0, 1.0, 1.0], [x1, 1.0, 1.0]], None);
        let m = voxelize([&s], &g.grid(), 0.5);
        let want = oracle::voxel_set(&g, std::slice::from_ref(&s), 0.5);
        assert_eq!(oracle::mask_set(&m), want);
        assert_eq!(want.len(), expected, "start {x0}");
    }
}

#[test]
fn adding_streamlines_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let inst = Instance::random(&mut rng);
        let gt = inst.to_mask(&inst.gt);
        let g = inst.grid.grid();
        let mut prev = (0usize, 0.0, 0.0);
        for k in 0..=inst.streamlines.len() {
            let m = voxelize(&inst.streamlines[..k], &g, 0.25);
            let c = coverage_scores(&m, &gt).unwrap();
            let cur = (m.count(), c.overlap, c.overreach);
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2);
            prev = cur;
        }
    }
}
