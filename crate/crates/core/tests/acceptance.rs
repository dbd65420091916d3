//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the summary lines always
//! reach the console. Exits non-zero when any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xoscgen_core::assembler::{Assembler, DecompositionTable};
use xoscgen_core::executor::fixtures::{monitor_cases, nonzero_counts};
use xoscgen_core::executor::{run_document, timeout_limit, Obb};
use xoscgen_core::metrics::{element_accuracy, icc_two_way_random, matching_accuracy, IccForm, RatingMatrix};
use xoscgen_core::pipeline::{parse, self_consistency_vote, Ablation};
use xoscgen_core::repository::TierName;
use xoscgen_core::representation::TrafficParticipant;
use xoscgen_core::xosc::{verify, FindingSeverity};
use xoscgen_core::{
    demo, DslCorpus, EgoPolicy, PipelineConfig, RepositoryConfig, RuleSet, ScenarioRepresentation, SlotId, XoscDocument,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Env {
    corpus: DslCorpus,
    repo: RepositoryConfig,
    rules: RuleSet,
    table: DecompositionTable,
}

impl Env {
    fn assembler(&self) -> Assembler<'_> {
        Assembler::new(&self.corpus, &self.repo, &self.rules, &self.table)
    }
}

const SEEDS: [u64; 4] = [0, 1, 2, 3];

fn c1_matching_accuracy(_: &Env) -> Check {
    let v = matching_accuracy(0.8731, 0.92).map_err(|e| e.to_string())?;
    ensure((0.798..=0.808).contains(&v), || format!("got {v}"))?;
    Ok(format!("0.8731 x 0.92 = {v:.4}"))
}

fn c2_timeout(_: &Env) -> Check {
    let t = timeout_limit(500.0, 13.889).map_err(|e| e.to_string())?;
    ensure((t - 360.0).abs() <= 0.1, || format!("500 m at 13.889 m/s gave {t}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let len: f64 = rng.gen_range(1.0..5000.0);
        let v: f64 = rng.gen_range(0.5..60.0);
        let a: f64 = rng.gen_range(0.1..10.0);
        let base = timeout_limit(len, v).unwrap();
        let direct = len / (0.1 * v);
        ensure((base - direct).abs() <= 1e-9 * direct, || {
            format!("L={len} v={v}: {base} vs {direct}")
        })?;
        let scaled = timeout_limit(a * len, v).unwrap();
        ensure((scaled - a * base).abs() <= 1e-9 * scaled, || {
            format!("not linear in length at L={len}")
        })?;
        let faster = timeout_limit(len, a * v).unwrap();
        ensure((faster * a - base).abs() <= 1e-9 * base, || {
            format!("not inverse in speed at v={v}")
        })?;
    }
    Ok(format!("timeout {t:.3} s; 100 random inputs linear"))
}

fn c3_left_turn(env: &Env) -> Check {
    let case = demo::case("left_turn").ok_or("left-turn case missing")?;
    let backend = demo::scripted_backend();
    let config = PipelineConfig::bundled();
    let parsed = parse(&case.text, &config, &backend, &env.repo, &env.rules).map_err(|e| e.to_string())?;
    let rep = parsed.representation;
    let oracle = rep.traffic_participants.first().map(|p| p.longitudinal_oracle.as_str());
    ensure(oracle == Some("yield"), || format!("longitudinal oracle {oracle:?}"))?;
    let (doc, _) = env.assembler().assemble(&rep, 11).map_err(|e| e.to_string())?;
    let xosc = doc.to_xosc();
    let errors: Vec<_> = verify(&xosc)
        .into_iter()
        .filter(|f| f.severity == FindingSeverity::Error)
        .collect();
    ensure(errors.is_empty(), || format!("verify errors: {errors:?}"))?;
    Ok("oracle = yield; verify() reports no errors".into())
}

/// Tally by hand: highest count wins, ties go to the earliest first sighting.
fn brute_force_winner(values: &[String]) -> String {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, v) in values.iter().enumerate() {
        counts.entry(v.as_str()).or_insert((0, i)).0 += 1;
    }
    let mut best: Option<(&str, usize, usize)> = None;
    for (v, (n, first)) in counts {
        best = match best {
            Some((_, bn, bf)) if bn > n || (bn == n && bf < first) => best,
            _ => Some((v, n, first)),
        };
    }
    best.expect("non-empty").0.to_string()
}

fn random_candidates(repo: &RepositoryConfig, rng: &mut ChaCha8Rng) -> Vec<ScenarioRepresentation> {
    let n = rng.gen_range(1..=10);
    // Up to five values per slot, drawn from the slot's vocabulary.
    let pool = |slot: SlotId, rng: &mut ChaCha8Rng| -> Vec<String> {
        let vocab = repo.slot(slot.name()).unwrap().vocabulary.clone();
        let k = rng.gen_range(1..=5.min(vocab.len()));
        vocab.into_iter().take(k).collect()
    };
    let scalar_pools: Vec<(SlotId, Vec<String>)> = SlotId::ALL
        .into_iter()
        .filter(|s| !s.is_participant())
        .map(|s| (s, pool(s, rng)))
        .collect();
    let part_pools: Vec<(SlotId, Vec<String>)> = SlotId::PARTICIPANT.into_iter().map(|s| (s, pool(s, rng))).collect();
    (0..n)
        .map(|_| {
            let mut rep = ScenarioRepresentation::empty("vote");
            for (slot, values) in &scalar_pools {
                *rep.get_mut(*slot).unwrap() = values[rng.gen_range(0..values.len())].clone();
            }
            for _ in 0..rng.gen_range(0..=2) {
                let mut p = TrafficParticipant {
                    participant_type: String::new(),
                    position_relation: String::new(),
                    longitudinal_oracle: String::new(),
                    lateral_oracle: String::new(),
                    global_behavior: String::new(),
                    count: 1,
                };
                for (slot, values) in &part_pools {
                    *p.get_mut(*slot).unwrap() = values[rng.gen_range(0..values.len())].clone();
                }
                rep.traffic_participants.push(p);
            }
            rep
        })
        .collect()
}

fn c4_self_consistency(env: &Env) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for round in 0..1000 {
        let cands = random_candidates(&env.repo, &mut rng);
        let voted = self_consistency_vote(&cands);
        for slot in SlotId::ALL.into_iter().filter(|s| !s.is_participant()) {
            let values: Vec<String> = cands.iter().map(|c| c.get(slot).unwrap().to_string()).collect();
            let want = brute_force_winner(&values);
            ensure(voted.get(slot) == Some(want.as_str()), || {
                format!("set {round}, {}: {:?} vs {want}", slot.name(), voted.get(slot))
            })?;
        }
        let aligned: Vec<Vec<TrafficParticipant>> = cands
            .iter()
            .map(|c| {
                let mut ps = c.traffic_participants.clone();
                ps.sort_by_key(|p| (p.participant_type.clone(), p.position_relation.clone()));
                ps
            })
            .collect();
        let lengths: Vec<String> = aligned.iter().map(|a| a.len().to_string()).collect();
        let len: usize = brute_force_winner(&lengths).parse().unwrap();
        ensure(voted.traffic_participants.len() == len, || {
            format!("set {round}: participant count")
        })?;
        for j in 0..len {
            for slot in SlotId::PARTICIPANT {
                let values: Vec<String> = aligned
                    .iter()
                    .filter_map(|a| a.get(j))
                    .map(|p| p.get(slot).unwrap().to_string())
                    .collect();
                let want = brute_force_winner(&values);
                let got = voted.traffic_participants[j].get(slot).unwrap();
                ensure(got == want, || {
                    format!("set {round}, {}[{j}]: {got} vs {want}", slot.name())
                })?;
            }
        }
    }
    Ok("1000 candidate sets agree with a hand tally".into())
}

fn tier_of(slot_key: &str) -> Option<TierName> {
    let prefix = slot_key.split('.').next()?;
    TierName::ALL.into_iter().find(|t| t.prefix() == prefix)
}

fn c5_determinism_and_priority(env: &Env) -> Check {
    let assembler = env.assembler();
    let cases = demo::cases();
    ensure(cases.len() >= 20, || format!("only {} cases", cases.len()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut mutations, mut skipped) = (0, 0);
    for case in &cases {
        for seed in SEEDS {
            let (doc, report) = assembler
                .assemble(&case.truth, seed)
                .map_err(|e| format!("{} seed {seed}: {e}", case.id))?;
            let (again, _) = assembler.assemble(&case.truth, seed).unwrap();
            ensure(doc.to_xosc().to_bytes() == again.to_xosc().to_bytes(), || {
                format!("{} seed {seed}: repeated assembly differs", case.id)
            })?;

            for slot in SlotId::ALL {
                let mut mutated = case.truth.clone();
                let target = match (slot.is_participant(), mutated.traffic_participants.first_mut()) {
                    (false, _) => mutated.get_mut(slot).unwrap(),
                    (true, Some(p)) => p.get_mut(slot).unwrap(),
                    (true, None) => continue,
                };
                let vocab = &env.repo.slot(slot.name()).unwrap().vocabulary;
                let others: Vec<&String> = vocab.iter().filter(|v| *v != target).collect();
                *target = others[rng.gen_range(0..others.len())].clone();
                let Ok((_, changed)) = assembler.assemble(&mutated, seed) else {
                    skipped += 1;
                    continue;
                };
                mutations += 1;
                let rank = env.repo.tier_priority(tier_of(slot.name()).unwrap());
                let higher = |key: &String| tier_of(key).is_some_and(|t| env.repo.tier_priority(t) < rank);
                let before: BTreeMap<_, _> = report.chosen.iter().filter(|(k, _)| higher(k)).collect();
                let after: BTreeMap<_, _> = changed.chosen.iter().filter(|(k, _)| higher(k)).collect();
                ensure(before == after, || {
                    format!(
                        "{} seed {seed}: changing {} moved a higher-priority choice",
                        case.id,
                        slot.name()
                    )
                })?;
                let unresolved = |r: &Vec<String>| r.iter().filter(|k| higher(k)).cloned().collect::<Vec<_>>();
                ensure(
                    unresolved(&report.unresolved) == unresolved(&changed.unresolved),
                    || {
                        format!(
                            "{} seed {seed}: changing {} altered higher-priority resolution",
                            case.id,
                            slot.name()
                        )
                    },
                )?;
            }
        }
    }
    Ok(format!(
        "{} cases x {} seeds byte-identical; {mutations} mutations checked, {skipped} refused",
        cases.len(),
        SEEDS.len()
    ))
}

fn c6_round_trip(env: &Env) -> Check {
    let assembler = env.assembler();
    let (mut docs, mut read_errors, mut runtime_errors) = (0, 0, 0);
    for case in demo::cases() {
        for seed in SEEDS {
            let (doc, _) = assembler.assemble(&case.truth, seed).map_err(|e| e.to_string())?;
            let emitted = doc.to_xosc();
            let bytes = emitted.to_bytes();
            let loaded = XoscDocument::load(&bytes).map_err(|e| format!("{} seed {seed}: {e}", case.id))?;
            ensure(loaded.structurally_eq(&emitted), || {
                format!("{} seed {seed}: tree changed", case.id)
            })?;
            ensure(loaded.to_bytes() == bytes, || {
                format!("{} seed {seed}: re-emit differs", case.id)
            })?;
            if verify(&loaded).iter().any(|f| f.severity == FindingSeverity::Error) {
                read_errors += 1;
            }
            if run_document(&loaded, &env.corpus, &EgoPolicy::lane_follow()).is_err() {
                runtime_errors += 1;
            }
            docs += 1;
        }
    }
    ensure(read_errors == 0, || format!("{read_errors} read errors"))?;
    Ok(format!(
        "{docs} documents round-trip; 0 read errors, {runtime_errors} runtime errors"
    ))
}

/// Inside test in the box's own frame, with a relative scale.
fn point_in(b: &Obb, scale: f64, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - b.cx, y - b.cy);
    let (c, s) = (b.heading.cos(), b.heading.sin());
    let lx = dx * c + dy * s;
    let ly = -dx * s + dy * c;
    lx.abs() <= 0.5 * b.length * scale && ly.abs() <= 0.5 * b.width * scale
}

/// Grid points covering a box, boundary included.
fn samples(b: &Obb, scale: f64, n: usize) -> Vec<(f64, f64)> {
    let (c, s) = (b.heading.cos(), b.heading.sin());
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let u = (i as f64 / (n - 1) as f64 - 0.5) * b.length * scale;
            let v = (j as f64 / (n - 1) as f64 - 0.5) * b.width * scale;
            out.push((b.cx + u * c - v * s, b.cy + u * s + v * c));
        }
    }
    out
}

fn sampled_overlap(a: &Obb, b: &Obb, scale: f64) -> bool {
    const N: usize = 41;
    samples(a, scale, N).iter().any(|&(x, y)| point_in(b, scale, x, y))
        || samples(b, scale, N).iter().any(|&(x, y)| point_in(a, scale, x, y))
}

fn c7_monitors(env: &Env) -> Check {
    let cases = monitor_cases(&env.corpus);
    for case in &cases {
        let got = nonzero_counts(&case.run());
        ensure(got == case.expected, || {
            format!("{}: {got:?} vs {:?}", case.name, case.expected)
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut checked, mut overlapping) = (0, 0);
    while checked < 1000 {
        let mut random_box = || {
            Obb::new(
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-3.2..3.2),
                rng.gen_range(0.5..6.0),
                rng.gen_range(0.3..3.0),
            )
        };
        let (a, b) = (random_box(), random_box());
        // Grazing contacts are below the sampling resolution; skip them.
        let inner = sampled_overlap(&a, &b, 0.97);
        if inner != sampled_overlap(&a, &b, 1.03) {
            continue;
        }
        ensure(a.overlaps(&b) == inner, || format!("disagreement on {a:?} / {b:?}"))?;
        overlapping += usize::from(inner);
        checked += 1;
    }
    Ok(format!(
        "{} monitor traces exact; 1000 box pairs agree with sampling ({overlapping} overlapping)",
        cases.len()
    ))
}

/// Two-way ANOVA by explicit sums, independent of the library's routine.
fn icc_oracle(rows: &[Vec<f64>]) -> Option<(f64, f64)> {
    let n = rows.len();
    let k = rows[0].len();
    let total: f64 = rows.iter().map(|r| r.iter().sum::<f64>()).sum();
    let mean = total / (n * k) as f64;
    let mut ssr = 0.0;
    for r in rows {
        let m = r.iter().sum::<f64>() / k as f64;
        ssr += k as f64 * (m - mean) * (m - mean);
    }
    let mut ssc = 0.0;
    for j in 0..k {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        ssc += n as f64 * (m - mean) * (m - mean);
    }
    let mut sst = 0.0;
    for r in rows {
        for v in r {
            sst += (v - mean) * (v - mean);
        }
    }
    let sse = sst - ssr - ssc;
    let msr = ssr / (n - 1) as f64;
    let msc = ssc / (k - 1) as f64;
    let mse = sse / ((n - 1) * (k - 1)) as f64;
    let (nf, kf) = (n as f64, k as f64);
    let d1 = msr + (kf - 1.0) * mse + kf * (msc - mse) / nf;
    let dk = msr + (msc - mse) / nf;
    if d1.abs() < 1e-9 || dk.abs() < 1e-9 {
        return None;
    }
    Some(((msr - mse) / d1, (msr - mse) / dk))
}

fn c8_icc(_: &Env) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut compared, mut ordered) = (0, 0);
    for _ in 0..200 {
        let n = rng.gen_range(2..=12);
        let k = rng.gen_range(2..=6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base: f64 = rng.gen_range(0.0..10.0);
                (0..k)
                    .map(|_| (base + rng.gen_range(-3.0..3.0) * 10.0).round() / 10.0)
                    .collect()
            })
            .collect();
        let m = RatingMatrix::new(rows.clone()).map_err(|e| e.to_string())?;
        let Some((o1, ok)) = icc_oracle(&rows) else { continue };
        let single = icc_two_way_random(&m, IccForm::Single).map_err(|e| e.to_string())?;
        let average = icc_two_way_random(&m, IccForm::Average).map_err(|e| e.to_string())?;
        ensure((single - o1).abs() <= 1e-9, || format!("ICC(2,1) {single} vs {o1}"))?;
        ensure((average - ok).abs() <= 1e-9, || format!("ICC(2,k) {average} vs {ok}"))?;
        compared += 1;
        if single >= 0.0 && average >= 0.0 {
            ensure(average >= single - 1e-12, || {
                format!("ICC(2,k) {average} < ICC(2,1) {single}")
            })?;
            ordered += 1;
        }
    }
    ensure(compared >= 190, || {
        format!("only {compared} matrices had a defined oracle")
    })?;
    let perfect = RatingMatrix::new(vec![vec![2.0, 2.0, 2.0], vec![5.0, 5.0, 5.0], vec![1.0, 1.0, 1.0]]).unwrap();
    for form in [IccForm::Single, IccForm::Average] {
        let v = icc_two_way_random(&perfect, form).map_err(|e| e.to_string())?;
        ensure((v - 1.0).abs() <= 1e-12, || format!("perfect agreement gave {v}"))?;
    }
    Ok(format!(
        "{compared} matrices within 1e-9; ordering held on {ordered}; perfect agreement = 1"
    ))
}

fn c9_ablations(env: &Env) -> Check {
    let backend = demo::scripted_backend();
    let cases = demo::cases();
    let mut means = Vec::new();
    for ablation in Ablation::ALL {
        let config = PipelineConfig::bundled().with_ablation(ablation);
        let mut pairs = Vec::new();
        for case in &cases {
            let (rep, trace) = match parse(&case.text, &config, &backend, &env.repo, &env.rules) {
                Ok(p) => (p.representation, p.trace),
                // A refused parse scores as an empty record.
                Err(f) => (ScenarioRepresentation::empty(case.text.clone()), f.trace),
            };
            let stages: Vec<_> = trace.stages.iter().map(|s| s.stage).collect();
            ensure(stages == ablation.stages(), || {
                format!("{} under {}: trace stages {stages:?}", case.id, ablation.label())
            })?;
            pairs.push((rep, case.truth.clone()));
        }
        let acc = element_accuracy(&pairs).map_err(|e| e.to_string())?;
        means.push((ablation.label(), acc.mean));
    }
    for w in means.windows(2) {
        ensure(w[1].1 >= w[0].1, || {
            format!("accuracy fell from {} to {}", w[0].0, w[1].0)
        })?;
    }
    let summary: Vec<String> = means.iter().map(|(l, m)| format!("{l} {m:.3}")).collect();
    Ok(summary.join(", "))
}

type Criterion = (&'static str, Duration, fn(&Env) -> Check);

fn main() {
    let env = Env {
        corpus: DslCorpus::bundled(),
        repo: RepositoryConfig::bundled(),
        rules: RuleSet::bundled(),
        table: DecompositionTable::bundled(),
    };
    let criteria: [Criterion; 9] = [
        (
            "matching accuracy formula",
            Duration::from_secs(1),
            c1_matching_accuracy,
        ),
        ("timeout formula", Duration::from_secs(1), c2_timeout),
        ("scripted left turn end to end", Duration::from_secs(5), c3_left_turn),
        (
            "self-consistency vote oracle",
            Duration::from_secs(10),
            c4_self_consistency,
        ),
        (
            "assembly determinism and priority",
            Duration::from_secs(30),
            c5_determinism_and_priority,
        ),
        ("emitter round trip", Duration::from_secs(30), c6_round_trip),
        ("monitor soundness", Duration::from_secs(60), c7_monitors),
        ("ICC oracle", Duration::from_secs(10), c8_icc),
        ("ablation plumbing", Duration::from_secs(20), c9_ablations),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = check(&env);
        let elapsed = started.elapsed();
        let over = elapsed > *budget;
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {}: {status} {name} ({elapsed:.2?}) {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
