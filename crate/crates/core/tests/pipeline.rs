use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semgrid_core::{
    align_cloud, discretize, loss_mask, masked_cross_entropy, project_to_pointcloud, rotate_pointcloud,
    synchronize_sequence, Camera, DepthMap, EgomotionTrack, GridGeometry, GroundPoint, LossMask, MorphProfile,
    PointCloud, ProbabilisticGrid, SemanticClass, SemanticGrid, SemanticImage, SensorFrame, SyncOptions, NUM_CLASSES,
};

fn random_class(rng: &mut impl Rng) -> SemanticClass {
    SemanticClass::ALL[rng.random_range(0..NUM_CLASSES)]
}

fn random_grid(rng: &mut impl Rng, geo: GridGeometry, p_unknown: f64) -> SemanticGrid {
    let cells = (0..geo.len())
        .map(|_| if rng.random_bool(p_unknown) { SemanticClass::Unknown } else { random_class(rng) })
        .collect();
    SemanticGrid::from_cells(geo, cells, 0.0).unwrap()
}

/// A flat scene: road everywhere below the horizon, a car patch, sky above.
fn ground_frame(cam: &Camera, w: usize, h: usize) -> (SemanticImage, DepthMap) {
    let mut img = SemanticImage::invalid(w, h);
    let mut depth = DepthMap::invalid(w, h);
    let height = -cam.ty;
    for v in 0..h {
        for u in 0..w {
            let r = cam.ray(u as f64, v as f64);
            if r[1] <= 1e-6 {
                continue;
            }
            // Ray has unit camera-z, so the hit's z-depth is the ray scale.
            let lambda = height / r[1];
            let class = if (u / 8 + v / 8) % 5 == 0 { SemanticClass::Car } else { SemanticClass::Road };
            img.set(u, v, Some(class));
            depth.set(u, v, lambda);
        }
    }
    (img, depth)
}

#[test]
fn stationary_identical_frames_synchronize_identically() {
    let cam = Camera::forward(60.0, 60.0, 32.0, 16.0, 1.5, 0.08);
    let (img, depth) = ground_frame(&cam, 64, 32);
    let times = [0.0, 0.25, 0.5, 0.75];
    let track = EgomotionTrack::constant(&times, 0.0, [0.0, 0.0]).unwrap();
    let frames: Vec<_> =
        times[..3].iter().map(|&t| SensorFrame { image: &img, depth: &depth, camera: cam, t }).collect();
    let options = SyncOptions { geometry: GridGeometry::square(64, 50.0), ..Default::default() };
    let grids = synchronize_sequence(&frames, &track, 0.75, &options).unwrap();
    assert_eq!(grids.len(), 3);
    assert!(grids[0].count(SemanticClass::Road) > 0);
    for g in &grids[1..] {
        assert_eq!(g.cells, grids[0].cells);
    }
    let nt = synchronize_sequence(&frames, &track, 0.75, &SyncOptions { translate: false, ..options }).unwrap();
    for (a, b) in nt.iter().zip(&grids) {
        assert_eq!(a.cells, b.cells);
    }
}

#[test]
fn single_frame_at_tau_is_the_aligned_frame() {
    let cam = Camera::forward(60.0, 60.0, 32.0, 16.0, 1.5, 0.08);
    let (img, depth) = ground_frame(&cam, 64, 32);
    let track = EgomotionTrack::constant(&[0.0, 1.0], 0.3, [0.2, 4.0]).unwrap();
    let geo = GridGeometry::square(64, 50.0);
    let frame = SensorFrame { image: &img, depth: &depth, camera: cam, t: 0.0 };
    let options = SyncOptions { geometry: geo, profile: MorphProfile::identity(), translate: true };
    let grids = synchronize_sequence(&[frame], &track, 0.0, &options).unwrap();
    let cloud = project_to_pointcloud(&img, &depth, &cam, 0.0).unwrap();
    let direct = discretize(&rotate_pointcloud(&cloud, 0.0), &geo);
    assert_eq!(grids[0], direct);
    let via_align = align_cloud(&cloud, &track, 0.0, &geo, &MorphProfile::identity()).unwrap();
    assert_eq!(via_align, direct);
}

#[test]
fn turning_agent_sees_static_world_consistently() {
    // A single ground marker seen from two poses must land in the same cell
    // once both frames are rotated to the first frame and translated to tau.
    let geo = GridGeometry::square(64, 64.0);
    let yaw_rate = 0.4;
    let speed = 4.0;
    let dt = 0.5;
    let times = [0.0, dt, 2.0 * dt];
    let track = EgomotionTrack::constant(&times, yaw_rate, [0.0, speed]).unwrap();
    let marker_world = [3.0_f64, 12.0_f64];
    // Agent poses in the world frame with the same integration rules as the track.
    let mut heading = 0.0_f64;
    let mut pos = [0.0_f64, 0.0];
    let mut clouds = Vec::new();
    for (i, &t) in times[..2].iter().enumerate() {
        if i > 0 {
            pos[0] -= speed * heading.sin() * dt;
            pos[1] += speed * heading.cos() * dt;
            heading += yaw_rate * dt;
        }
        // World → agent: translate, then rotate by −heading.
        let (dx, dz) = (marker_world[0] - pos[0], marker_world[1] - pos[1]);
        let (s, c) = (-heading).sin_cos();
        let p = GroundPoint { x: c * dx - s * dz, z: s * dx + c * dz, class: SemanticClass::PoleSign };
        clouds.push(PointCloud { points: vec![p], timestamp: t });
    }
    let aligned = track.aligned(0.0).unwrap();
    let mut cells = Vec::new();
    for cloud in &clouds {
        let g = align_cloud(cloud, &track, 0.0, &geo, &MorphProfile::identity()).unwrap();
        let g = semgrid_core::translate_to(&g, &aligned, cloud.timestamp, 2.0 * dt).unwrap();
        let idx = g.cells.iter().position(|&c| c == SemanticClass::PoleSign).unwrap();
        cells.push(idx);
    }
    let (c0, c1) = (cells[0] as isize, cells[1] as isize);
    let w = geo.width as isize;
    assert!((c0 % w - c1 % w).abs() <= 1 && (c0 / w - c1 / w).abs() <= 1, "{cells:?}");
}

#[test]
fn discretize_matches_sorted_paint_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let geo = GridGeometry::square(16, 16.0);
    for _ in 0..200 {
        let n = rng.random_range(0..=200);
        let points: Vec<_> = (0..n)
            .map(|_| GroundPoint {
                x: rng.random_range(-10.0..10.0),
                z: rng.random_range(-10.0..10.0),
                class: random_class(&mut rng),
            })
            .collect();
        let cloud = PointCloud { points: points.clone(), timestamp: 0.0 };
        let mut oracle = vec![SemanticClass::Unknown; 256];
        let mut sorted = points;
        // Stable sort keeps insertion order among equal keys, so painting in
        // this order reproduces "larger key wins, ties go to the later point".
        sorted.sort_by_key(|p| p.class.priority_key());
        for p in &sorted {
            let col = 8.0 + (p.x / 1.0).round();
            let row = 8.0 - (p.z / 1.0).round();
            if (0.0..16.0).contains(&col) && (0.0..16.0).contains(&row) {
                oracle[row as usize * 16 + col as usize] = p.class;
            }
        }
        assert_eq!(discretize(&cloud, &geo).cells, oracle);
    }
}

#[test]
fn masked_loss_matches_substitution_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let geo = GridGeometry::square(8, 8.0);
    for _ in 0..100 {
        let target = random_grid(&mut rng, geo, 0.4);
        let inputs = [random_grid(&mut rng, geo, 0.5), random_grid(&mut rng, geo, 0.5)];
        let refs: Vec<&SemanticGrid> = inputs.iter().collect();
        let mask = loss_mask(&target, &refs, 0).unwrap();
        for i in 0..geo.len() {
            let covered = target.cells[i] != SemanticClass::Unknown
                || inputs.iter().any(|g| g.cells[i] != SemanticClass::Unknown);
            let want = covered && target.cells[i] == SemanticClass::Unknown;
            assert_eq!(mask.mask.bits[i], want);
        }
        let mut features = Vec::with_capacity(geo.len() * NUM_CLASSES);
        for _ in 0..geo.len() {
            let raw: Vec<f64> = (0..NUM_CLASSES).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = raw.iter().sum();
            features.extend(raw.iter().map(|v| v / s));
        }
        let pred = ProbabilisticGrid::new(geo, features).unwrap();
        let (loss, grad) = masked_cross_entropy(&pred, &target, &mask).unwrap();
        let one_hot = ProbabilisticGrid::<f64>::one_hot(&target);
        let mut oracle = 0.0;
        for i in 0..geo.len() {
            let src = if mask.ignored(i) { one_hot.cell(i) } else { pred.cell(i) };
            oracle -= src[target.cells[i].index()].ln();
        }
        oracle /= geo.len() as f64;
        assert!((loss - oracle).abs() < 1e-10);
        for i in (0..geo.len()).filter(|&i| mask.ignored(i)) {
            assert!(grad[i * NUM_CLASSES..(i + 1) * NUM_CLASSES].iter().all(|&g| g == 0.0));
        }
    }
    let target = random_grid(&mut rng, geo, 0.0);
    let all = LossMask { mask: semgrid_core::Mask::new(8, 8, true), ..LossMask::empty(8, 8) };
    let (loss, grad) = masked_cross_entropy(&ProbabilisticGrid::<f64>::uniform(geo), &target, &all).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}
