mod common;

use cave_core::bench::{default_strata, generate_batch, label_balance, GenOptions, Scenario};
use cave_core::credit::{evidence_credit, focus_credit, target_scale, FocusConfig};
use cave_core::reward::{aggregate, group_advantages, RewardConfig, StdKind};
use cave_core::scoring::MockScorer;
use cave_core::stats::{mcnemar_with_threshold, normal_ci, paired_delta_ci, wilson_ci, Z95};
use cave_core::trajectory::{Action, ActionKind, Trajectory, ZoomBox};
use cave_core::{compute_step_credits, StepCredits, Tokenizer, WordTokenizer};
use proptest::prelude::*;

fn zoom(b: [f64; 4]) -> Action {
    Action { kind: ActionKind::Zoom, text: "zoom".into(), tokens: vec![], zoom_box: Some(ZoomBox::from(b)) }
}

fn step(c_bu: f64, c_ea: f64, c_af: f64) -> StepCredits {
    StepCredits { round: 1, c_bu, c_ea, c_af, is_zoom: false, rho: None, rho_hat: None, u: None, gate: None }
}

proptest! {
    #[test]
    fn focus_credit_is_bounded(
        b in prop::array::uniform4(-0.5f64..1.5),
        c_bu in -5.0f64..5.0,
        c_ea in 0.0f64..5.0,
        u in -1.0f64..2.0,
    ) {
        let rho_hat = target_scale(u, &FocusConfig::default());
        prop_assert!((0.02..=0.30).contains(&rho_hat));
        let out = focus_credit(&zoom(b), c_bu, c_ea, rho_hat);
        prop_assert!((0.0..=1.0).contains(&out.credit));
        prop_assert_eq!(out.invalid_box, !ZoomBox::from(b).is_valid());
        if out.invalid_box {
            prop_assert_eq!(out.credit, 0.0);
        }
        let reason = Action { kind: ActionKind::Reason, text: "hm".into(), tokens: vec![], zoom_box: Some(ZoomBox::from(b)) };
        prop_assert_eq!(focus_credit(&reason, c_bu, c_ea, rho_hat).credit, 0.0);
    }

    #[test]
    fn evidence_credit_is_mean_positive_gain(pairs in prop::collection::vec((-8.0f64..0.0, -8.0f64..0.0), 0..8)) {
        let (next, prev): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let c = evidence_credit(&next, &prev).unwrap();
        prop_assert!(c >= 0.0);
        let max_gain = pairs.iter().map(|(n, p)| n - p).fold(0.0, f64::max);
        prop_assert!(c <= max_gain + 1e-12);
        let mut up = next.clone();
        if let Some(x) = up.first_mut() {
            *x += 1.0;
        }
        prop_assert!(evidence_credit(&up, &prev).unwrap() >= c);
    }

    #[test]
    fn aggregate_stays_inside_clip_envelope(steps in prop::collection::vec((-10.0f64..10.0, 0.0f64..10.0, 0.0f64..1.0), 1..12)) {
        let cfg = RewardConfig::default();
        let credits: Vec<StepCredits> = steps.iter().map(|&(a, b, c)| step(a, b, c)).collect();
        let r = aggregate(&credits, &cfg).unwrap();
        let w: f64 = (0..steps.len()).map(|i| cfg.decay_base.powi(i as i32)).sum();
        for c in [r.c_bu, r.c_ea, r.c_af] {
            prop_assert!(c >= cfg.clip_lo * w - 1e-12 && c <= cfg.clip_hi * w + 1e-12);
        }
        prop_assert!(r.c_ea >= 0.0 && r.c_af >= 0.0);
        let expect = cfg.lambda_bu * r.c_bu + cfg.lambda_ea * r.c_ea + cfg.lambda_af * r.c_af;
        prop_assert!((r.r_cave - expect).abs() < 1e-12);
        prop_assert_eq!(r.r_total, r.r_cave);
    }

    #[test]
    fn advantages_are_centred_and_bounded(rewards in prop::collection::vec(-3.0f64..3.0, 2..32), delta in 0.0f64..0.1) {
        let g = group_advantages(&rewards, delta, StdKind::Population).unwrap();
        let n = rewards.len() as f64;
        let sum: f64 = g.advantages.iter().sum();
        prop_assert!(sum.abs() < 1e-9 * n);
        // population std of the advantages is std / (std + delta) <= 1
        let var = g.advantages.iter().map(|a| a * a).sum::<f64>() / n;
        prop_assert!(var <= 1.0 + 1e-9);
        for (r, a) in rewards.iter().zip(&g.advantages) {
            prop_assert!((*r > g.mean) == (*a > 0.0) || (r - g.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn intervals_contain_the_estimate(n in 1u64..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as u64;
        let p = k as f64 / n as f64;
        let w = wilson_ci(k, n, Z95).unwrap();
        prop_assert!(0.0 <= w.lo && w.lo <= p && p <= w.hi && w.hi <= 1.0);
        let c = normal_ci(k, n, Z95).unwrap();
        prop_assert!(0.0 <= c.lo && c.lo <= 100.0 * p + 1e-9 && 100.0 * p - 1e-9 <= c.hi && c.hi <= 100.0);
        // Wilson pulls towards one half, so it is never wider than twice z/sqrt(4n) plus slack
        prop_assert!(w.width() <= Z95 / (n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn paired_delta_is_centred(b in 0u64..200, c in 0u64..200, extra in 0u64..500) {
        let n = b + c + extra;
        prop_assume!(n > 0);
        let d = paired_delta_ci(b, c, n, Z95).unwrap();
        prop_assert!(d.lo <= d.delta && d.delta <= d.hi);
        prop_assert!((d.delta + paired_delta_ci(c, b, n, Z95).unwrap().delta).abs() < 1e-9);
    }

    #[test]
    fn mcnemar_is_symmetric_probability(b in 0u64..400, c in 0u64..400, limit in 0u64..60) {
        let m = mcnemar_with_threshold(b, c, limit);
        prop_assert!((0.0..=1.0).contains(&m.p_value));
        let swapped = mcnemar_with_threshold(c, b, limit);
        prop_assert_eq!(m.p_value, swapped.p_value);
        prop_assert_eq!(m.method, swapped.method);
        if b == c {
            prop_assert!(m.p_value > 0.99 || b + c > limit);
        }
    }

    #[test]
    fn tokenizer_is_deterministic_and_in_range(text in "[a-zA-Z0-9 ,.{}]{0,60}", vocab in 2u32..70_000) {
        let tok = WordTokenizer::new(vocab);
        let ids = tok.encode(&text);
        prop_assert_eq!(&ids, &tok.encode(&text));
        prop_assert!(ids.iter().all(|&i| i < vocab));
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>()) {
        let tok = WordTokenizer::default();
        let doc = common::random_document(&mut common::rng(seed), "t");
        let traj = Trajectory::from_document(&doc, &tok).unwrap();
        let back = traj.to_document();
        let again = Trajectory::from_document(&back, &tok).unwrap();
        prop_assert_eq!(again.fingerprint(), traj.fingerprint());
        prop_assert_eq!(again.to_document(), back.clone());
        let json = serde_json::to_string(&back).unwrap();
        prop_assert_eq!(serde_json::from_str::<cave_core::TrajectoryDocument>(&json).unwrap(), back);
    }

    #[test]
    fn step_credits_respect_their_ranges(seed in any::<u64>()) {
        let tok = WordTokenizer::default();
        let mut rng = common::rng(seed);
        let doc = common::random_document(&mut rng, "t");
        let traj = Trajectory::from_document(&doc, &tok).unwrap();
        let units = common::random_units(&mut rng, &tok);
        let focus = FocusConfig::default();
        let table = common::synth_table(&mut rng, &traj, &units, focus.entropy_top_k);
        let report = compute_step_credits(&traj, &MockScorer::new(table), &units, &focus).unwrap();
        prop_assert_eq!(report.steps.len(), traj.len());
        for (s, r) in report.steps.iter().zip(traj.rounds()) {
            prop_assert!(s.c_ea >= 0.0);
            prop_assert!((0.0..=1.0).contains(&s.c_af));
            if r.action.kind != ActionKind::Zoom {
                prop_assert_eq!(s.c_af, 0.0);
            }
            if let Some(h) = s.rho_hat {
                prop_assert!((focus.rho_min..=focus.rho_max).contains(&h));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn binary_batches_are_balanced(count in 1usize..14, seed_base in 0u64..1_000_000) {
        let scenario = Scenario::Match;
        let strata = default_strata(scenario, count, None).unwrap();
        let batch = generate_batch(scenario, &strata, seed_base, &GenOptions::default(), None).unwrap();
        prop_assert_eq!(batch.len(), count);
        let (y, n) = label_balance(batch.iter().map(|g| &g.sample));
        prop_assert_eq!(y + n, count);
        prop_assert!(y.abs_diff(n) <= 1);
    }
}
