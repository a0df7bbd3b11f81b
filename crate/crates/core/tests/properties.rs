use proptest::prelude::*;
use vrleak::anthro::head_height_p95;
use vrleak::behavior::{detect_languages, PanelLayout};
use vrleak::defense::{apply_bounded_laplace, Bounds};
use vrleak::device::{classify_device, estimate_tracking_rate, DeviceFeatures};
use vrleak::env::{
    default_servers, estimate_room_dims, geolocate, great_circle_m, rtt_to_distance, GeoPoint, PropagationModel,
    ServerSite,
};
use vrleak::geom::{Quat, Vec3};
use vrleak::inference::{build_identity_index, identify_user, FeatureVector, IDENTITY_FEATURES};
use vrleak::model::{parse_trace_csv, write_trace_csv, EventPayload, EventRecord, Pose, TelemetryFrame, TelemetryTrace};
use vrleak::sim::{simulate_latency, DeviceTable};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn quat() -> impl Strategy<Value = Quat> {
    (vec3(1.0), -3.1..3.1f64).prop_map(|(axis, angle)| {
        if axis.norm() < 1e-3 {
            Quat::IDENTITY
        } else {
            Quat::from_axis_angle(axis, angle)
        }
    })
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(3.0), quat()).prop_map(|(p, q)| Pose { position: p, orientation: q })
}

/// Frames with strictly increasing times from gaps in [1 ms, 50 ms).
fn trace(max: usize) -> impl Strategy<Value = TelemetryTrace> {
    prop::collection::vec((0.001..0.05f64, pose(), pose(), pose()), 2..max).prop_map(|rows| {
        let mut t = 0.0;
        let frames = rows
            .into_iter()
            .map(|(dt, hmd, left, right)| {
                t += dt;
                TelemetryFrame { t, hmd, left, right }
            })
            .collect();
        TelemetryTrace::new(frames, None).unwrap()
    })
}

fn map_poses(tr: &TelemetryTrace, f: impl Fn(&Pose) -> Pose) -> TelemetryTrace {
    tr.map_frames(|fr| TelemetryFrame { t: fr.t, hmd: f(&fr.hmd), left: f(&fr.left), right: f(&fr.right) }).unwrap()
}

fn to_unit(p: GeoPoint) -> Vec3 {
    let (lat, lon) = (p.lat_deg.to_radians(), p.lon_deg.to_radians());
    Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
}

fn from_unit(v: Vec3) -> GeoPoint {
    GeoPoint::new(v.z.clamp(-1.0, 1.0).asin().to_degrees(), v.y.atan2(v.x).to_degrees())
}

/// Sum of squared distance residuals, computed from per-server mean RTTs.
fn geo_objective(at: GeoPoint, samples: &[vrleak::model::LatencySample], servers: &[ServerSite], m: &PropagationModel) -> f64 {
    servers
        .iter()
        .map(|s| {
            let rtts: Vec<f64> = samples.iter().filter(|x| x.server_id == s.server_id).map(|x| x.rtt_s).collect();
            let d = rtt_to_distance(rtts.iter().sum::<f64>() / rtts.len() as f64, m);
            (great_circle_m(at, s.point()) - d).powi(2)
        })
        .sum()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_csv_round_trip(tr in trace(40)) {
        let text = write_trace_csv(&tr);
        let back = parse_trace_csv(&text[..]).unwrap();
        prop_assert_eq!(back.len(), tr.len());
        // Once values carry 9 digits, the round trip is exact.
        prop_assert_eq!(&write_trace_csv(&back), &text);
        prop_assert_eq!(&parse_trace_csv(&text[..]).unwrap(), &back);
        for (a, b) in tr.frames().iter().zip(back.frames()) {
            prop_assert!(close(a.t, b.t, 1e-8));
            for (p, q) in a.poses().iter().zip(b.poses()) {
                for (x, y) in p.position.to_array().iter().zip(q.position.to_array()) {
                    prop_assert!(close(*x, y, 1e-8), "{} vs {}", x, y);
                }
                let d = p.orientation.conjugate() * q.orientation;
                prop_assert!(d.w.abs() > 1.0 - 1e-8, "{:?} vs {:?}", p.orientation, q.orientation);
            }
        }
    }

    #[test]
    fn head_height_scales_and_shifts(tr in trace(60), k in 0.2..5.0f64, c in -2.0..2.0f64) {
        let w = [(tr.start(), tr.end())];
        let base = head_height_p95(&tr, &w).unwrap();
        let scaled = map_poses(&tr, |p| Pose { position: Vec3::new(p.position.x, k * p.position.y, p.position.z), ..*p });
        prop_assert!(close(head_height_p95(&scaled, &w).unwrap(), k * base, 1e-9));
        let shifted = map_poses(&tr, |p| Pose { position: p.position + Vec3::new(0.0, c, 0.0), ..*p });
        prop_assert!((head_height_p95(&shifted, &w).unwrap() - (base + c)).abs() < 1e-9);
    }

    #[test]
    fn head_height_ignores_orientation(tr in trace(60), q in quat()) {
        let w = [(tr.start(), tr.end())];
        let turned = map_poses(&tr, |p| Pose { orientation: q * p.orientation, ..*p });
        prop_assert_eq!(head_height_p95(&turned, &w), head_height_p95(&tr, &w));
    }

    #[test]
    fn head_height_monotone_in_lifts(tr in trace(60), lifts in prop::collection::vec(0.0..0.5f64, 60)) {
        let w = [(tr.start(), tr.end())];
        let mut i = 0;
        let lifted = tr.map_frames(|f| {
            i += 1;
            let hmd = Pose { position: f.hmd.position + Vec3::new(0.0, lifts[i - 1], 0.0), ..f.hmd };
            TelemetryFrame { hmd, ..*f }
        }).unwrap();
        prop_assert!(head_height_p95(&lifted, &w).unwrap() >= head_height_p95(&tr, &w).unwrap() - 1e-12);
    }

    #[test]
    fn room_dims_ignore_translation(tr in trace(80), dx in -3.0..3.0f64, dz in -3.0..3.0f64, dy in -1.0..1.0f64) {
        let moved = map_poses(&tr, |p| Pose { position: p.position + Vec3::new(dx, dy, dz), ..*p });
        let (a, b) = (estimate_room_dims(&tr), estimate_room_dims(&moved));
        prop_assert!((a.length_m - b.length_m).abs() < 1e-9);
        prop_assert!((a.width_m - b.width_m).abs() < 1e-9);
    }

    #[test]
    fn languages_follow_the_room(panel in 0usize..8, dist in 0.5..3.0f64, off in vec3(0.2), by in vec3(5.0)) {
        let layout = PanelLayout::shipped();
        let p = &layout.panels[panel % layout.panels.len()];
        let head = p.center + p.normal * dist + off;
        let look = Quat::looking_along((p.center - head).normalized());
        let pose = Pose { position: head, orientation: look };
        let frame = |t: f64, pose: Pose| TelemetryFrame { t, hmd: pose, left: pose, right: pose };
        let events = vec![EventRecord::new(1.0, 13, EventPayload::SpokenPassword { text: "hello".into() }).unwrap()];
        let tr = TelemetryTrace::new(vec![frame(0.5, pose), frame(1.0, pose), frame(1.5, pose)], None).unwrap();
        let moved_pose = Pose { position: head + by, ..pose };
        let moved = TelemetryTrace::new(vec![frame(0.5, moved_pose), frame(1.0, moved_pose), frame(1.5, moved_pose)], None).unwrap();
        let a = detect_languages(&tr, &events, &layout);
        let b = detect_languages(&moved, &events, &layout.translated(by));
        prop_assert_eq!(a.clone(), b);
        prop_assert!(a.unwrap().contains(&p.language));
    }

    #[test]
    fn geolocation_ignores_server_order(lat in -60.0..70.0f64, lon in -179.0..179.0f64, perm in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        let servers = default_servers();
        let model = PropagationModel::default();
        let samples = simulate_latency(GeoPoint::new(lat, lon), &servers, &model, 0.002, 4, 7).unwrap();
        let reordered: Vec<_> = perm.iter().map(|&i| servers[i].clone()).collect();
        let mut shuffled = samples.clone();
        shuffled.reverse();
        let a = geolocate(&samples, &servers, &model).unwrap();
        let b = geolocate(&shuffled, &reordered, &model).unwrap();
        prop_assert!((a.lat_deg - b.lat_deg).abs() < 1e-6 && (a.lon_deg - b.lon_deg).abs() < 1e-6, "{:?} vs {:?}", a, b);
    }

    #[test]
    fn geolocation_rotates_with_the_globe(lat in -60.0..70.0f64, lon in -179.0..179.0f64, q in quat()) {
        let servers = default_servers();
        let model = PropagationModel::default();
        let truth = GeoPoint::new(lat, lon);
        let samples = simulate_latency(truth, &servers, &model, 0.003, 4, 8).unwrap();
        let turn = |p: GeoPoint| from_unit(q.rotate(to_unit(p)));
        let turned: Vec<ServerSite> = servers.iter().map(|s| {
            let p = turn(s.point());
            ServerSite::new(&s.server_id, p.lat_deg, p.lon_deg)
        }).collect();
        let a = geolocate(&samples, &servers, &model).unwrap();
        let b = geolocate(&samples, &turned, &model).unwrap();
        // Only meaningful when both runs find the global optimum.
        prop_assume!(a.converged && b.converged);
        let want = to_unit(turn(a.point()));
        let angle = want.cross(to_unit(b.point())).norm().asin();
        prop_assert!(angle < 1e-6, "{} rad", angle);
    }

    #[test]
    fn geolocation_beats_every_grid_node(lat in -60.0..70.0f64, lon in -179.0..179.0f64, seed in any::<u64>()) {
        let servers = default_servers();
        let model = PropagationModel::default();
        let samples = simulate_latency(GeoPoint::new(lat, lon), &servers, &model, 0.005, 16, seed).unwrap();
        let est = geolocate(&samples, &servers, &model).unwrap();
        let best = geo_objective(est.point(), &samples, &servers, &model);
        for i in 0..=36 {
            for j in 0..72 {
                let node = GeoPoint::new(-90.0 + 5.0 * i as f64, -180.0 + 5.0 * j as f64);
                prop_assert!(best <= geo_objective(node, &samples, &servers, &model) * (1.0 + 1e-9) + 1e-6);
            }
        }
        let rms = (best / servers.len() as f64).sqrt();
        prop_assert!((rms - est.residual_m).abs() <= 1e-6 * rms.max(1.0));
    }

    #[test]
    fn device_classification_ignores_table_order(
        hz in 50.0..160.0f64,
        refresh in prop::option::of(50.0..160.0f64),
        mp in prop::option::of(2.0..20.0f64),
        seed in any::<u64>(),
    ) {
        let table = DeviceTable::shipped().devices;
        let mut shuffled = table.clone();
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed.rotate_left(i as u32) as usize) % n);
        }
        let f = DeviceFeatures { tracking_hz: hz, refresh_hz: refresh, resolution_mp: mp, fov_deg: None };
        prop_assert_eq!(classify_device(&f, &table), classify_device(&f, &shuffled));
    }

    #[test]
    fn identity_survives_affine_rescaling(
        rows in prop::collection::vec(prop::collection::vec(0.0..10.0f64, 7), 3..30),
        probe in prop::collection::vec(0.0..10.0f64, 7),
        scale in prop::collection::vec(0.1..10.0f64, 7),
        shift in prop::collection::vec(-50.0..50.0f64, 7),
    ) {
        let fv = |v: &[f64], affine: bool| {
            let mut f = FeatureVector::empty();
            for (k, name) in IDENTITY_FEATURES.iter().enumerate() {
                f.set(name, if affine { scale[k] * v[k] + shift[k] } else { v[k] });
            }
            f
        };
        let plain: Vec<_> = rows.iter().enumerate().map(|(i, r)| (format!("u{i}"), fv(r, false))).collect();
        let mapped: Vec<_> = rows.iter().enumerate().map(|(i, r)| (format!("u{i}"), fv(r, true))).collect();
        let (ia, ib) = (build_identity_index(&plain).unwrap(), build_identity_index(&mapped).unwrap());
        let a = identify_user(&ia, &fv(&probe, false)).unwrap();
        let b = identify_user(&ib, &fv(&probe, true)).unwrap();
        prop_assert_eq!(a.0, b.0);
        prop_assert!(close(a.1, b.1, 1e-6));
    }

    #[test]
    fn tracking_rate_ignores_rigid_motion(rate in 30.0..150.0f64, jitter in prop::collection::vec(-1e-4..1e-4f64, 300), q in quat(), d in vec3(5.0)) {
        let frames = (0..300)
            .map(|i| {
                let p = Pose::at(Vec3::new((i as f64 * 0.01).sin(), 1.6, (i / 2) as f64 * 1e-3));
                TelemetryFrame { t: 1.0 + i as f64 / rate + jitter[i], hmd: p, left: p, right: p }
            })
            .collect();
        let tr = TelemetryTrace::new(frames, None).unwrap();
        let moved = map_poses(&tr, |p| Pose { position: q.rotate(p.position) + d, orientation: q * p.orientation });
        let (a, b) = (estimate_tracking_rate(&tr).unwrap(), estimate_tracking_rate(&moved).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn defense_stays_in_bounds_and_keeps_orientation(tr in trace(40), eps in 0.1..20.0f64, seed in any::<u64>()) {
        let bounds = Bounds::default();
        let a = apply_bounded_laplace(&tr, eps, &bounds, seed).unwrap();
        prop_assert_eq!(&a, &apply_bounded_laplace(&tr, eps, &bounds, seed).unwrap());
        for (x, y) in tr.frames().iter().zip(a.frames()) {
            prop_assert_eq!(x.t, y.t);
            for (p, q) in x.poses().iter().zip(y.poses()) {
                prop_assert_eq!(p.orientation, q.orientation);
                prop_assert!((bounds.x.0..=bounds.x.1).contains(&q.position.x));
                prop_assert!((bounds.y.0..=bounds.y.1).contains(&q.position.y));
                prop_assert!((bounds.z.0..=bounds.z.1).contains(&q.position.z));
            }
        }
    }
}
