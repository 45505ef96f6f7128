//! Acceptance suite. Each test covers one release criterion and prints a
//! single PASS/FAIL line; run with `cargo test --test acceptance -- --nocapture`
//! to see the summary lines.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shelfscan_core::aggregation::{flood_fill_visited, unique_filter, window_size};
use shelfscan_core::circstats::{circular_deviation_variance_deg, circular_mean_deg, wrap_deg_180};
use shelfscan_core::config::RunConfig;
use shelfscan_core::evalkit::{
    generate_scene, reference, synth_pattern, BackgroundSpec, MetricsTally, SceneSpec,
};
use shelfscan_core::matching::{adjacency, DescriptorIndex, Vote};
use shelfscan_core::pipeline::{run_multi_product, PatternEntry, SceneContext};
use shelfscan_core::votespace::accumulate;

fn verdict(name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{name}: {detail}");
}

fn test_vote(x: f64, y: f64, adj: f64) -> Vote {
    Vote {
        pattern_idx: 0,
        scene_idx: 0,
        descriptor_distance: 0.0,
        adjacency: adj,
        scale_quotient: 1.0,
        rotation_delta: 0.0,
        scene_x: x,
        scene_y: y,
    }
}

fn exact_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.matching.exact_nn = true;
    cfg
}

// -- criterion: unit-exact adjacency transform and window sizing -----------

#[test]
fn unit_exact_adjacency_and_window_size() {
    let start = Instant::now();
    let a0 = adjacency(0.0, 10.0);
    let a5 = adjacency(5.0, 10.0);
    let a_eps = adjacency(10.0 - 1e-9, 10.0);
    let adjacency_ok =
        (a0 - 1.0).abs() <= 1e-9 && (a5 - 0.75).abs() <= 1e-9 && a_eps > 0.0 && a_eps <= 1e-9;
    let windows_ok = window_size(99) == 3 && window_size(100) == 5 && window_size(700) == 17;
    let fast = start.elapsed().as_secs_f64() < 1.0;
    verdict(
        "unit_exact_adjacency_and_window_size",
        adjacency_ok && windows_ok && fast,
        &format!(
            "adj(0)={a0}, adj(5)={a5}, adj(10-eps)={a_eps:.3e}, windows {}/{}/{}, {:.3}s",
            window_size(99),
            window_size(100),
            window_size(700),
            start.elapsed().as_secs_f64()
        ),
    );
}

// -- criterion: proposition detector equals brute-force reference ----------

#[test]
fn oracle_proposition_detector_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    let mut mismatches = 0usize;
    let mut total_props = 0usize;
    for case in 0..200 {
        let (w, h) = (256usize, 256usize);
        let n = rng.gen_range(30..300);
        let votes: Vec<Vote> = (0..n)
            .map(|_| {
                test_vote(
                    rng.gen_range(0.0..w as f64),
                    rng.gen_range(0.0..h as f64),
                    rng.gen_range(0.01..1.0),
                )
            })
            .collect();
        let w_size = [3, 5, 7, 9, 17][case % 5];
        let vs = accumulate(&votes, w, h).unwrap();
        let got = vs.detect_propositions(w_size, 0.01);
        total_props += got.len();

        // brute force: per-pixel gathered window sums, strict max with the
        // same (raw value, y, x) tie key, quality floor, same ordering
        let image = vs.vote_image();
        let r = (w_size / 2) as isize;
        let mut sums = vec![0.0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ny in (y as isize - r).max(0)..=((y as isize + r).min(h as isize - 1)) {
                    for nx in (x as isize - r).max(0)..=((x as isize + r).min(w as isize - 1)) {
                        acc += image[ny as usize * w + nx as usize];
                    }
                }
                sums[y * w + x] = acc;
            }
        }
        let max_sum = sums.iter().copied().fold(0.0f64, f64::max);
        let floor = 0.01 * max_sum;
        let key = |x: usize, y: usize| (std::cmp::Reverse(image[y * w + x].to_bits()), y, x);
        let mut expected = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let s = sums[y * w + x];
                if s <= 0.0 || s < floor {
                    continue;
                }
                let mut wins = true;
                'nb: for ny in (y as isize - r).max(0)..=((y as isize + r).min(h as isize - 1)) {
                    for nx in (x as isize - r).max(0)..=((x as isize + r).min(w as isize - 1)) {
                        let (nx, ny) = (nx as usize, ny as usize);
                        if (nx, ny) == (x, y) {
                            continue;
                        }
                        let ns = sums[ny * w + nx];
                        if ns > s || (ns == s && key(nx, ny) < key(x, y)) {
                            wins = false;
                            break 'nb;
                        }
                    }
                }
                if wins {
                    expected.push((x, y, s));
                }
            }
        }
        expected.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| (a.1, a.0).cmp(&(b.1, b.0))));
        let got_tuples: Vec<(usize, usize, f64)> = got
            .iter()
            .map(|p| (p.x, p.y, p.window_adjacency_sum))
            .collect();
        if got_tuples != expected {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "oracle_proposition_detector",
        mismatches == 0 && elapsed < 10.0,
        &format!("200 random 256x256 spaces, {total_props} propositions, {mismatches} mismatches, {elapsed:.2}s"),
    );
}

// -- criterion: flood fill equals reference BFS -----------------------------

#[test]
fn oracle_flood_fill_matches_reference() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7002);
    let mut mismatches = 0usize;
    for _ in 0..200 {
        let (w, h) = (48usize, 32usize);
        let density = rng.gen_range(0.3..0.8);
        let mask: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        let seed = (rng.gen_range(0..w), rng.gen_range(0..h));
        let mut got = flood_fill_visited(seed, w, h, |x, y| mask[y * w + x]);
        got.sort_unstable();

        // reference: depth-first with an explicit stack
        let mut expected = Vec::new();
        if mask[seed.1 * w + seed.0] {
            let mut seen = vec![false; w * h];
            let mut stack = vec![seed];
            seen[seed.1 * w + seed.0] = true;
            while let Some((x, y)) = stack.pop() {
                expected.push((x, y));
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        if (nx, ny) != (x, y) && !seen[ny * w + nx] && mask[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
        expected.sort_unstable();
        if got != expected {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "oracle_flood_fill",
        mismatches == 0 && elapsed < 10.0,
        &format!("200 random masks, {mismatches} mismatches, {elapsed:.2}s"),
    );
}

// -- criterion: circular statistics equal direct computation ----------------

#[test]
fn oracle_circular_statistics() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7003);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.gen_range(1..40);
        let angles: Vec<f64> = if case % 2 == 0 {
            (0..n).map(|_| rng.gen_range(0.0..360.0)).collect()
        } else {
            let center: f64 = rng.gen_range(0.0..360.0);
            (0..n)
                .map(|_| (center + rng.gen_range(-30.0..30.0)).rem_euclid(360.0))
                .collect()
        };
        // direct unit-vector computation
        let sx: f64 = angles.iter().map(|a| a.to_radians().cos()).sum();
        let sy: f64 = angles.iter().map(|a| a.to_radians().sin()).sum();
        let resultant = (sx * sx + sy * sy).sqrt() / n as f64;
        let mean = sy.atan2(sx).to_degrees();

        let (got_mean, got_resultant) = circular_mean_deg(&angles).unwrap();
        worst = worst.max((got_resultant - resultant).abs());
        if resultant > 1e-9 {
            worst = worst.max(wrap_deg_180(got_mean - mean).abs());
            let devs: Vec<f64> = angles.iter().map(|&a| wrap_deg_180(a - mean)).collect();
            let dev_mean = devs.iter().sum::<f64>() / n as f64;
            let var =
                devs.iter().map(|d| (d - dev_mean) * (d - dev_mean)).sum::<f64>() / n as f64;
            let got_var = circular_deviation_variance_deg(&angles);
            if n >= 2 {
                worst = worst.max((got_var - var).abs() / var.max(1.0));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "oracle_circular_statistics",
        worst <= 1e-9 && elapsed < 10.0,
        &format!("1000 random angle sets, worst deviation {worst:.3e}, {elapsed:.2}s"),
    );
}

// -- criterion: unique filter equals brute-force max-per-key ----------------

#[test]
fn oracle_unique_filter() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7004);
    let mut mismatches = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(0..120);
        let votes: Vec<Vote> = (0..n)
            .map(|i| {
                let mut v = test_vote(
                    rng.gen_range(0.0..64.0),
                    rng.gen_range(0.0..64.0),
                    rng.gen_range(0.01..1.0),
                );
                v.pattern_idx = rng.gen_range(0..30);
                v.scene_idx = i;
                v
            })
            .collect();
        let got = unique_filter(&votes);
        let mut keys: Vec<usize> = votes.iter().map(|v| v.pattern_idx).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut ok = got.len() == keys.len();
        if ok {
            for key in keys {
                let best = votes
                    .iter()
                    .filter(|v| v.pattern_idx == key)
                    .max_by(|a, b| {
                        a.adjacency
                            .total_cmp(&b.adjacency)
                            .then_with(|| b.scene_idx.cmp(&a.scene_idx))
                    })
                    .unwrap();
                ok &= got.iter().find(|v| v.pattern_idx == key) == Some(best);
            }
        }
        if !ok {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "oracle_unique_filter",
        mismatches == 0 && elapsed < 10.0,
        &format!("1000 random vote sets, {mismatches} mismatches, {elapsed:.2}s"),
    );
}

// -- criterion: approximate index recall vs exact search --------------------

#[test]
fn oracle_ann_recall() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7005);
    // descriptor-like clustered cloud: unit-normalized non-negative vectors
    let prototypes: Vec<Vec<f32>> = (0..30)
        .map(|_| (0..128).map(|_| rng.gen_range(0.0f32..1.0)).collect())
        .collect();
    let normalize = |v: Vec<f32>| {
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f32>>()
    };
    let descriptors: Vec<Vec<f32>> = (0..1000)
        .map(|_| {
            let p = &prototypes[rng.gen_range(0..prototypes.len())];
            normalize(
                p.iter()
                    .map(|&x| (x + rng.gen_range(-0.1..0.1f32)).max(0.0))
                    .collect(),
            )
        })
        .collect();
    let index = DescriptorIndex::build(descriptors.clone(), 4, 256, false, 42).unwrap();
    let queries: Vec<Vec<f32>> = (0..500)
        .map(|_| {
            let base = &descriptors[rng.gen_range(0..descriptors.len())];
            normalize(
                base.iter()
                    .map(|&x| (x + rng.gen_range(-0.03..0.03f32)).max(0.0))
                    .collect(),
            )
        })
        .collect();
    let mut hits = 0usize;
    for q in &queries {
        let (_, got_dist) = index.nearest(q);
        let best = descriptors
            .iter()
            .map(|d| {
                (d.iter()
                    .zip(q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f32>() as f64)
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        if got_dist <= best + 1e-9 {
            hits += 1;
        }
    }
    let recall = hits as f64 / queries.len() as f64;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "oracle_ann_recall",
        recall >= 0.95 && elapsed < 10.0,
        &format!("recall {recall:.3} over 500 queries on 1000 descriptors, {elapsed:.2}s"),
    );
}

// -- synthetic suite helpers -------------------------------------------------

fn suite_patterns(seeds: &[(u64, usize, usize)]) -> BTreeMap<String, shelfscan_core::RasterImage> {
    seeds
        .iter()
        .map(|&(seed, w, h)| (format!("p{seed}"), synth_pattern(seed, w, h)))
        .collect()
}

struct PreparedScene {
    scene: SceneContext,
    truth: shelfscan_core::evalkit::GroundTruth,
}

fn prepare_scene(
    spec: &SceneSpec,
    patterns: &BTreeMap<String, shelfscan_core::RasterImage>,
    cfg: &RunConfig,
) -> PreparedScene {
    let (img, truth) = generate_scene(spec, patterns).expect("scene generates");
    PreparedScene {
        scene: SceneContext::prepare(&spec.scene_id, img, cfg),
        truth,
    }
}

// -- criterion: positive synthetic suite ------------------------------------

#[test]
fn positive_suite_detection_rate() {
    let start = Instant::now();
    let cfg = exact_config();
    let pattern_seeds: [(u64, usize, usize); 5] = [
        (1, 250, 180),
        (2, 240, 170),
        (3, 260, 185),
        (4, 230, 175),
        (5, 245, 190),
    ];
    let patterns = suite_patterns(&pattern_seeds);
    let ids: Vec<String> = patterns.keys().cloned().collect();
    let registered: BTreeMap<String, PatternEntry> = patterns
        .iter()
        .map(|(id, img)| (id.clone(), PatternEntry::register(id, img.clone(), &cfg)))
        .collect();

    let mut tally = MetricsTally::default();
    let mut localization_worst = 0.0f64;
    for i in 0..50 {
        let product = &ids[i % ids.len()];
        let spec = SceneSpec {
            scene_id: format!("pos{i}"),
            seed: 9000 + i as u64,
            width: 1024,
            height: 768,
            pattern_ids: vec![product.clone()],
            placement_count: 1 + i % 4,
            scale_range: [0.6, 1.6],
            rotation_range: [-25.0, 25.0],
            noise_sigma: 8.0,
            illumination_amplitude: 0.0,
            blur_sigma: 0.0,
            background: BackgroundSpec::default(),
        };
        let prepared = prepare_scene(&spec, &patterns, &cfg);
        let report =
            run_multi_product(&prepared.scene, &[registered[product].clone()], &cfg).unwrap();
        let pattern_img = &patterns[product];
        let radius = window_size(pattern_img.width().max(pattern_img.height())) as f64;
        tally.add(&report, &prepared.truth, radius);
        for occ in &report.occurrences {
            let nearest = prepared
                .truth
                .placements
                .iter()
                .map(|p| {
                    ((occ.envelope.center_x - p.center[0]).powi(2)
                        + (occ.envelope.center_y - p.center[1]).powi(2))
                    .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            if nearest <= radius {
                localization_worst = localization_worst.max(nearest);
            }
        }
    }
    let metrics = tally.finalize();
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "positive_suite_detection_rate",
        metrics.detection_rate >= 0.85 && elapsed <= 600.0,
        &format!(
            "rate {:.3} over {} placements in 50 scenes (reference full-scale anchors {:.3}/{:.3}), worst accepted localization {:.2}px, {:.0}s",
            metrics.detection_rate,
            metrics.placements,
            reference::DETECTION_RATE_12MPX,
            reference::DETECTION_RATE_3MPX,
            localization_worst,
            elapsed
        ),
    );
}

// -- criterion: negative suite + filter-cascade regression ------------------

#[test]
fn negative_suite_false_detections_and_cascade_regression() {
    let start = Instant::now();
    let cfg = exact_config();
    let mut disabled_cfg = exact_config();
    // neutralize the graphical filters (5) and (6)
    disabled_cfg.cascade.hamming_reject_frac = 1.0;
    disabled_cfg.cascade.ncc_threshold = 0.0;

    let pattern_seeds: [(u64, usize, usize); 6] = [
        (10, 250, 180),
        (11, 235, 170),
        (12, 255, 185),
        (13, 225, 165),
        (14, 245, 190),
        (15, 240, 175),
    ];
    let patterns = suite_patterns(&pattern_seeds);
    let ids: Vec<String> = patterns.keys().cloned().collect();
    let registered: BTreeMap<String, PatternEntry> = patterns
        .iter()
        .map(|(id, img)| (id.clone(), PatternEntry::register(id, img.clone(), &cfg)))
        .collect();

    let mut tally = MetricsTally::default();
    let mut enabled_false = 0usize;
    let mut disabled_false = 0usize;
    for i in 0..50 {
        let distractor_a = &ids[i % ids.len()];
        let distractor_b = &ids[(i + 1) % ids.len()];
        let absent = &ids[(i + 3) % ids.len()];
        let spec = SceneSpec {
            scene_id: format!("neg{i}"),
            seed: 20000 + i as u64,
            width: 960,
            height: 680,
            pattern_ids: vec![distractor_a.clone(), distractor_b.clone()],
            placement_count: 3,
            scale_range: [0.75, 1.2],
            rotation_range: [-15.0, 15.0],
            noise_sigma: 6.0,
            illumination_amplitude: 0.0,
            blur_sigma: 0.0,
            background: BackgroundSpec::default(),
        };
        let prepared = prepare_scene(&spec, &patterns, &cfg);
        let pattern_img = &patterns[absent];
        let radius = window_size(pattern_img.width().max(pattern_img.height())) as f64;

        let report =
            run_multi_product(&prepared.scene, &[registered[absent].clone()], &cfg).unwrap();
        tally.add(&report, &prepared.truth, radius);
        enabled_false += report.occurrences.len();

        let report_disabled = run_multi_product(
            &prepared.scene,
            &[registered[absent].clone()],
            &disabled_cfg,
        )
        .unwrap();
        disabled_false += report_disabled.occurrences.len();
    }
    let metrics = tally.finalize();
    let chance_ok = metrics.false_detection_chance <= 0.05;
    let regression_ok = disabled_false > enabled_false;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "negative_suite_false_detections",
        chance_ok && regression_ok,
        &format!(
            "false chance {:.3} over 50 absent-pattern processes (reference full-scale anchors {:.4}/{:.4}, avg per affected process {:?} vs reference {:.2}/{:.2}); cascade regression: {} false detections with filters (5)(6) disabled vs {} enabled; {:.0}s",
            metrics.false_detection_chance,
            reference::FALSE_DETECTION_CHANCE_12MPX,
            reference::FALSE_DETECTION_CHANCE_3MPX,
            metrics.avg_false_detections,
            reference::AVG_FALSE_DETECTIONS_12MPX,
            reference::AVG_FALSE_DETECTIONS_3MPX,
            disabled_false,
            enabled_false,
            elapsed
        ),
    );
}

// -- criterion: the second phase helps under illumination gradients ---------

#[test]
fn two_phase_gain_under_illumination() {
    let start = Instant::now();
    let cfg_two = exact_config();
    let mut cfg_one = exact_config();
    cfg_one.pipeline.two_phase = false;

    let pattern_seeds: [(u64, usize, usize); 3] = [(21, 250, 180), (22, 240, 185), (23, 255, 175)];
    let patterns = suite_patterns(&pattern_seeds);
    let ids: Vec<String> = patterns.keys().cloned().collect();
    let registered: BTreeMap<String, PatternEntry> = patterns
        .iter()
        .map(|(id, img)| (id.clone(), PatternEntry::register(id, img.clone(), &cfg_two)))
        .collect();

    let mut matched_one = 0usize;
    let mut matched_two = 0usize;
    let mut placements = 0usize;
    let mut scenes_gained = 0usize;
    for i in 0..20 {
        let product = &ids[i % ids.len()];
        let base_scale = 0.8 + 0.03 * (i % 8) as f64;
        let spec = SceneSpec {
            scene_id: format!("ill{i}"),
            seed: 30000 + i as u64,
            width: 960,
            height: 640,
            pattern_ids: vec![product.clone()],
            placement_count: 4,
            scale_range: [base_scale, base_scale + 0.04],
            rotation_range: [-8.0, 8.0],
            noise_sigma: 8.0,
            illumination_amplitude: 0.55,
            // shared defocus the scene-extracted pattern inherits but the
            // clean product pattern does not
            blur_sigma: 1.8 + 0.3 * (i % 4) as f64,
            background: BackgroundSpec::default(),
        };
        let prepared = prepare_scene(&spec, &patterns, &cfg_two);
        let pattern_img = &patterns[product];
        let radius = window_size(pattern_img.width().max(pattern_img.height())) as f64;

        let mut tally_one = MetricsTally::default();
        let report_one =
            run_multi_product(&prepared.scene, &[registered[product].clone()], &cfg_one).unwrap();
        tally_one.add(&report_one, &prepared.truth, radius);
        let m1 = tally_one.finalize();

        let mut tally_two = MetricsTally::default();
        let report_two =
            run_multi_product(&prepared.scene, &[registered[product].clone()], &cfg_two).unwrap();
        tally_two.add(&report_two, &prepared.truth, radius);
        let m2 = tally_two.finalize();

        matched_one += m1.matched;
        matched_two += m2.matched;
        placements += prepared.truth.placements.len();
        if m2.matched > m1.matched {
            scenes_gained += 1;
        }
    }
    let rate_one = matched_one as f64 / placements as f64;
    let rate_two = matched_two as f64 / placements as f64;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "two_phase_gain_under_illumination",
        rate_two >= rate_one && scenes_gained >= 3,
        &format!(
            "phase-1 rate {rate_one:.3}, merged rate {rate_two:.3}, strict gain on {scenes_gained}/20 scenes, {elapsed:.0}s"
        ),
    );
}

// -- criterion: property families run headlessly ----------------------------

#[test]
fn property_suites_headless() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7006);
    let mut ok = true;

    // consolidation idempotence
    for _ in 0..100 {
        let occs: Vec<shelfscan_core::pipeline::Occurrence> = (0..rng.gen_range(0..20))
            .map(|_| shelfscan_core::pipeline::Occurrence {
                pattern_id: format!("p{}", rng.gen_range(0..3)),
                envelope: shelfscan_core::geometry::Envelope::new(
                    rng.gen_range(10.0..500.0),
                    rng.gen_range(10.0..400.0),
                    rng.gen_range(20.0..120.0),
                    rng.gen_range(20.0..120.0),
                    0.0,
                ),
                adjacency_sum: rng.gen_range(0.1..10.0),
                normalized_adjacency: rng.gen_range(0.001..0.1),
                phase: 1,
                vote_count: rng.gen_range(7..40),
            })
            .collect();
        for same in [true, false] {
            let once = shelfscan_core::pipeline::consolidate(&occs, same, 0.5);
            let twice = shelfscan_core::pipeline::consolidate(&once, same, 0.5);
            ok &= once == twice;
        }
    }

    // erasure mass accounting
    for _ in 0..100 {
        let votes: Vec<Vote> = (0..rng.gen_range(0..150))
            .map(|_| {
                test_vote(
                    rng.gen_range(0.0..64.0),
                    rng.gen_range(0.0..64.0),
                    rng.gen_range(0.01..1.0),
                )
            })
            .collect();
        let env = shelfscan_core::geometry::Envelope::new(
            rng.gen_range(0.0..64.0),
            rng.gen_range(0.0..64.0),
            rng.gen_range(4.0..40.0),
            rng.gen_range(4.0..40.0),
            rng.gen_range(-90.0..90.0),
        );
        let mut vs = accumulate(&votes, 64, 64).unwrap();
        let before = vs.total_adjacency();
        let removed_mass: f64 = votes
            .iter()
            .filter(|v| env.contains(v.scene_x, v.scene_y))
            .map(|v| v.adjacency)
            .sum();
        vs.erase_region(&env);
        let after = vs.total_adjacency();
        ok &= (before - removed_mass - after).abs() <= 1e-9 * before.max(1.0);
    }

    // cascade monotonicity (tightening the vote-count bound)
    for _ in 0..200 {
        let votes: Vec<Vote> = (0..rng.gen_range(0..20))
            .map(|i| {
                let mut v = test_vote(32.0, 32.0, rng.gen_range(0.01..1.0));
                v.pattern_idx = i;
                v
            })
            .collect();
        let group = shelfscan_core::aggregation::VoteGroup::from_votes(
            votes,
            shelfscan_core::votespace::Proposition {
                x: 32,
                y: 32,
                window_adjacency_sum: 1.0,
            },
        );
        let loose = shelfscan_core::filtercascade::CascadeConfig::default();
        let tight = shelfscan_core::filtercascade::CascadeConfig {
            min_votes: 10,
            ..Default::default()
        };
        let accept_loose = shelfscan_core::filtercascade::f1_vote_count(&group, &loose).accepted;
        let accept_tight = shelfscan_core::filtercascade::f1_vote_count(&group, &tight).accepted;
        ok &= !(accept_tight && !accept_loose);
    }

    // serialization round trip
    for case in 0..50 {
        let points: Vec<shelfscan_core::features::FeaturePoint> = (0..rng.gen_range(0..10))
            .map(|_| shelfscan_core::features::FeaturePoint {
                x: rng.gen_range(0.0..64.0),
                y: rng.gen_range(0.0..48.0),
                scale: rng.gen_range(0.5..20.0),
                orientation: rng.gen_range(0.0..360.0),
                descriptor: (0..8).map(|_| rng.gen_range(0.0f32..1.0)).collect(),
                color: shelfscan_core::imagecore::ColorSample::from_rgb(
                    rng.gen(),
                    rng.gen(),
                    rng.gen(),
                ),
                luminance: rng.gen(),
            })
            .collect();
        let fs = shelfscan_core::features::FeatureSet {
            source_id: format!("case{case}"),
            image_w: 64,
            image_h: 48,
            descriptor_len: 8,
            points,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        shelfscan_core::features::write_features(&fs, &path).unwrap();
        let back = shelfscan_core::features::read_features(&path).unwrap();
        ok &= back.points.len() == fs.points.len();
        for (a, b) in back.points.iter().zip(&fs.points) {
            ok &= a.x.to_bits() == b.x.to_bits()
                && a.y.to_bits() == b.y.to_bits()
                && a.scale.to_bits() == b.scale.to_bits()
                && a.orientation.to_bits() == b.orientation.to_bits()
                && a.descriptor == b.descriptor;
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "property_suites_headless",
        ok,
        &format!("consolidation idempotence, erasure accounting, cascade monotonicity, serialization round-trip; {elapsed:.1}s"),
    );
}
