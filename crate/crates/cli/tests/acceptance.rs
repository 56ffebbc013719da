use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use pcgen_cli::pipeline::{train_diffusion_stage, train_vae_stage, DiffusionStage, VaeStage};
use pcgen_core::{LabeledPointCloud, PartVocabulary, PointCloudSet};
use pcgen_metrics::*;
use pcgen_model::*;
use pcgen_nn::{grad_check, GradCheckOptions, Parameterized, Tensor};
use pcgen_synth::{gaussian_baseline, recombine_attack, synth_set, Alignment, AttackConfig, ShapeFamilyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DATA_SEED: u64 = 0;
const TRAIN_SEED: u64 = 0;
const GEN_SEED: u64 = 1;
const POINTS: usize = 256;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn selected(id: usize) -> bool {
    match std::env::var("PCGEN_ACCEPTANCE") {
        Ok(list) if !list.trim().is_empty() => list.split(',').any(|s| s.trim() == id.to_string()),
        _ => true,
    }
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Result<Outcome>) -> Option<bool> {
    if !selected(id) {
        println!("SKIP {id:>2} {name}");
        return None;
    }
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e:#}")),
    };
    let secs = start.elapsed().as_secs_f64();
    println!("{} {id:>2} {name}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
    Some(pass)
}

fn uniform_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
    (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn sq_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn brute_chamfer(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let one_way = |x: &[f64], y: &[f64]| {
        let rows: Vec<&[f64]> = x.chunks(dim).collect();
        let total: f64 = rows
            .iter()
            .map(|p| y.chunks(dim).map(|q| sq_dist(p, q)).fold(f64::INFINITY, f64::min))
            .sum();
        total / rows.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

fn brute_pcd(x: &LabeledPointCloud, y: &LabeledPointCloud) -> f64 {
    let parts_of = |c: &LabeledPointCloud| {
        let mut m: BTreeMap<u16, Vec<f64>> = BTreeMap::new();
        for i in 0..c.len() {
            m.entry(c.labels()[i]).or_default().extend_from_slice(c.point(i));
        }
        m
    };
    let (px, py) = (parts_of(x), parts_of(y));
    if !px.keys().eq(py.keys()) {
        return f64::INFINITY;
    }
    px.iter().map(|(p, pts)| brute_chamfer(pts, &py[p], x.dim())).sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn brute_emd(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let n = a.len() / dim;
    permutations(n)
        .iter()
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(i, &j)| sq_dist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]).sqrt())
                .sum::<f64>()
                / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn labeled(rng: &mut ChaCha8Rng, n: usize, dim: usize, parts: usize, used: &[u16]) -> LabeledPointCloud {
    let labels = (0..n).map(|_| used[rng.random_range(0..used.len())]).collect();
    LabeledPointCloud::new(uniform_points(rng, n, dim), dim, labels, parts).unwrap()
}

fn distance_oracles() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let instances = 250;
    let (mut cd_err, mut pcd_err, mut emd_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut pcd_inf = 0;
    for _ in 0..instances {
        let dim = rng.random_range(2..=3);
        let (na, nb) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let (a, b) = (uniform_points(&mut rng, na, dim), uniform_points(&mut rng, nb, dim));
        cd_err = cd_err.max((chamfer(&a, &b, dim)? - brute_chamfer(&a, &b, dim)).abs());

        let used: &[u16] = if rng.random_bool(0.3) { &[0, 2] } else { &[0, 1, 2] };
        let (nx, ny) = (rng.random_range(3..=30), rng.random_range(3..=30));
        let x = labeled(&mut rng, nx, dim, 3, &[0, 1, 2]);
        let y = labeled(&mut rng, ny, dim, 3, used);
        let (got, want) = (part_aware_chamfer(&x, &y)?, brute_pcd(&x, &y));
        if want.is_infinite() {
            pcd_inf += 1;
            if got != want {
                pcd_err = f64::INFINITY;
            }
        } else {
            pcd_err = pcd_err.max((got - want).abs());
        }

        let n = rng.random_range(1..=7);
        let (p, q) = (uniform_points(&mut rng, n, dim), uniform_points(&mut rng, n, dim));
        emd_err = emd_err.max((emd_exact(&p, &q, dim, DEFAULT_EMD_CAP)? - brute_emd(&p, &q, dim)).abs());
    }
    let worst = cd_err.max(pcd_err).max(emd_err);
    outcome(
        worst <= 1e-9,
        format!(
            "{instances} instances each; max abs err cd {cd_err:.1e}, p-cd {pcd_err:.1e} ({pcd_inf} infinite), emd {emd_err:.1e}"
        ),
    )
}

type Dist<'a> = &'a dyn Fn(&LabeledPointCloud, &LabeledPointCloud) -> f64;

fn oracle_one_nna(real: &[LabeledPointCloud], gen: &[LabeledPointCloud], d: Dist) -> f64 {
    let pool: Vec<(bool, usize, &LabeledPointCloud)> = real
        .iter()
        .enumerate()
        .map(|(i, c)| (false, i, c))
        .chain(gen.iter().enumerate().map(|(i, c)| (true, i, c)))
        .collect();
    let mut same = 0;
    for (a, &(set_a, _, ca)) in pool.iter().enumerate() {
        let mut best: Option<(f64, bool, usize)> = None;
        for (b, &(set_b, idx_b, cb)) in pool.iter().enumerate() {
            if a == b {
                continue;
            }
            let cand = (d(ca, cb), set_a == set_b, idx_b);
            let better = match best {
                None => true,
                Some(cur) => match cand.0.total_cmp(&cur.0) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => (cand.1, cand.2) < (cur.1, cur.2),
                },
            };
            if better {
                best = Some(cand);
            }
        }
        if best.unwrap().1 {
            same += 1;
        }
    }
    same as f64 / pool.len() as f64
}

fn oracle_cov(real: &[LabeledPointCloud], gen: &[LabeledPointCloud], d: Dist) -> f64 {
    let mut covered = vec![false; real.len()];
    for g in gen {
        let mut best = 0;
        for r in 1..real.len() {
            if d(&real[r], g).total_cmp(&d(&real[best], g)).is_lt() {
                best = r;
            }
        }
        covered[best] = true;
    }
    covered.iter().filter(|&&c| c).count() as f64 / real.len() as f64
}

fn oracle_mmd(real: &[LabeledPointCloud], gen: &[LabeledPointCloud], d: Dist) -> f64 {
    let mut total = 0.0;
    for r in real {
        total += gen.iter().map(|g| d(r, g)).fold(f64::INFINITY, f64::min);
    }
    total / real.len() as f64
}

fn part_clouds(set: &[LabeledPointCloud], part: u16) -> Vec<LabeledPointCloud> {
    set.iter()
        .filter(|c| c.has_part(part))
        .map(|c| {
            let pts = c.part_points(part);
            let n = pts.len() / c.dim();
            LabeledPointCloud::new(pts, c.dim(), vec![part; n], c.parts()).unwrap()
        })
        .collect()
}

fn oracle_part_averaged(
    real: &[LabeledPointCloud],
    gen: &[LabeledPointCloud],
    parts: usize,
    metric: fn(&[LabeledPointCloud], &[LabeledPointCloud], Dist) -> f64,
) -> f64 {
    let cd = |a: &LabeledPointCloud, b: &LabeledPointCloud| chamfer(a.points(), b.points(), a.dim()).unwrap();
    let (mut total, mut counted) = (0.0, 0);
    for part in 0..parts as u16 {
        let (rp, gp) = (part_clouds(real, part), part_clouds(gen, part));
        if rp.is_empty() && gp.is_empty() {
            continue;
        }
        total += metric(&rp, &gp, &cd);
        counted += 1;
    }
    total / counted as f64
}

fn random_labeled_set(rng: &mut ChaCha8Rng, name: &str, count: usize) -> PointCloudSet {
    let clouds = (0..count)
        .map(|_| {
            let n = rng.random_range(5..=12);
            let mut labels: Vec<u16> = (0..n).map(|_| rng.random_range(0..2)).collect();
            if rng.random_bool(0.25) {
                labels.fill(0);
            } else {
                labels[0] = 0;
                labels[1] = 1;
            }
            LabeledPointCloud::new(uniform_points(rng, n, 3), 3, labels, 2).unwrap()
        })
        .collect();
    PointCloudSet::new(name, PartVocabulary::anonymous(2).unwrap(), clouds).unwrap()
}

fn shifted(set: &PointCloudSet, by: f64) -> PointCloudSet {
    let clouds = set
        .iter()
        .map(|c| {
            let pts = c.points().iter().map(|v| v + by).collect();
            LabeledPointCloud::new(pts, c.dim(), c.labels().to_vec(), c.parts()).unwrap()
        })
        .collect();
    PointCloudSet::new("shifted", set.vocab().clone(), clouds).unwrap()
}

fn metric_values(real: &PointCloudSet, gen: &PointCloudSet, kind: DistanceKind, metrics: &[MetricName]) -> Result<Vec<f64>> {
    let (reports, _) = evaluate_sets(real, gen, kind, metrics, EvalOptions::default())?;
    Ok(reports.iter().map(|r| r.value.0).collect())
}

fn metric_oracles() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let all = [
        MetricName::OneNna,
        MetricName::Cov,
        MetricName::Mmd,
        MetricName::OneNnaP,
        MetricName::CovP,
        MetricName::MmdP,
    ];
    let cd = |a: &LabeledPointCloud, b: &LabeledPointCloud| chamfer(a.points(), b.points(), a.dim()).unwrap();
    let pcd = |a: &LabeledPointCloud, b: &LabeledPointCloud| part_aware_chamfer(a, b).unwrap();
    let trials = 20;
    let mut mismatches = Vec::new();
    for trial in 0..trials {
        let real = random_labeled_set(&mut rng, "real", 8);
        let mut gen = random_labeled_set(&mut rng, "gen", 8).into_clouds();
        // Exact copies exercise the tie rules.
        if trial % 4 == 0 {
            gen[3] = real.clouds()[5].clone();
            gen[6] = real.clouds()[5].clone();
        }
        let gen = PointCloudSet::new("gen", real.vocab().clone(), gen)?;
        let (r, g) = (real.clouds(), gen.clouds());
        for (kind, d) in [(DistanceKind::Cd, &cd as Dist), (DistanceKind::Pcd, &pcd as Dist)] {
            let got = metric_values(&real, &gen, kind, &all)?;
            let want = [
                oracle_one_nna(r, g, d),
                oracle_cov(r, g, d),
                oracle_mmd(r, g, d),
                oracle_part_averaged(r, g, 2, oracle_one_nna),
                oracle_part_averaged(r, g, 2, oracle_cov),
                oracle_part_averaged(r, g, 2, oracle_mmd),
            ];
            for ((m, a), b) in all.iter().zip(&got).zip(&want) {
                if a.to_bits() != b.to_bits() {
                    mismatches.push(format!("trial {trial} {kind} {}: {a} vs {b}", m.as_str()));
                }
            }
        }
    }
    let real = random_labeled_set(&mut rng, "real", 8);
    let dup = metric_values(&real, &real.clone().with_name("copy"), DistanceKind::Cd, &[MetricName::OneNna])?[0];
    let sep = metric_values(&real, &shifted(&real, 100.0), DistanceKind::Cd, &[MetricName::OneNna])?[0];
    let pass = mismatches.is_empty() && dup == 0.0 && sep == 1.0;
    let mut detail = format!("{trials} trials × 2 distances × 6 metrics; duplicate 1-NNA {dup}, separated 1-NNA {sep}");
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; {} mismatches, first {first}", mismatches.len()));
    }
    outcome(pass, detail)
}

fn one_nna_of(real: &PointCloudSet, gen: &PointCloudSet, metric: MetricName) -> Result<f64> {
    Ok(metric_values(real, gen, DistanceKind::Pcd, &[metric])?[0])
}

fn recombination() -> Result<Outcome> {
    let cfg = ShapeFamilyConfig::stick_ball(POINTS, DATA_SEED);
    let all = synth_set(&cfg, 400)?;
    let train = all.select("train", &(0..200).collect::<Vec<_>>());
    let test = all.select("test", &(200..300).collect::<Vec<_>>());
    let held = all.select("held-out", &(300..400).collect::<Vec<_>>());
    let mut ac = AttackConfig::new(Alignment::CentroidSnap, 100, DATA_SEED);
    ac.unique_per_part = true;
    let attack = recombine_attack(&train, &ac)?;
    let nna_attack = one_nna_of(&test, &attack, MetricName::OneNna)?;
    let nna_base = one_nna_of(&test, &held, MetricName::OneNna)?;
    let p_attack = one_nna_of(&test, &attack, MetricName::OneNnaP)?;
    let p_base = one_nna_of(&test, &held, MetricName::OneNnaP)?;
    let gap = nna_attack - nna_base;
    let drift = (p_attack - p_base).abs();
    outcome(
        gap >= 0.15 && drift <= 0.05,
        format!(
            "1-NNA(p-cd) attack {} vs held-out {} (gap {}); 1-NNA-P attack {} vs held-out {} (diff {})",
            pct(nna_attack),
            pct(nna_base),
            pct(gap),
            pct(p_attack),
            pct(p_base),
            pct(drift)
        ),
    )
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn perturb<M: Parameterized>(m: &mut M, rng: &mut ChaCha8Rng, s: f64) {
    for (_, t) in m.params_mut() {
        for v in t.data_mut() {
            *v += s * rng.random_range(-1.0..1.0);
        }
    }
}

fn gradient_checks() -> Result<Outcome> {
    let opts = GradCheckOptions { h: 1e-4, kink_fallback: true, ..Default::default() };
    let mut kinked = 0;
    let vae_cfg = VaeConfig::new(2, 2);
    let (d_z, d_h) = (vae_cfg.d_z, vae_cfg.d_h);
    let diff_cfg = DiffusionConfig::default();
    let (mut worst_vae, mut worst_global, mut worst_point) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    let n = 10;
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);

        let mut vae = Vae::new(vae_cfg, &mut rng)?;
        perturb(&mut vae, &mut rng, 0.1);
        let x = Tensor::matrix(n, 2, uniform_points(&mut rng, n, 2))?;
        let labels: Vec<u16> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let y = one_hot(&labels, 2);
        let noise = VaeNoise::sample(&mut rng, n, &vae.config);
        let w = VaeLossWeights { lambda_z: 0.3, lambda_h: 0.7 };
        let mut g = vae.zeros_like();
        vae.elbo_loss(&x, &y, &noise, w, &mut g)?;
        let r = grad_check(&vae, &g, |m| m.elbo_terms(&x, &y, &noise, w).unwrap().total, opts);
        worst_vae = worst_vae.max(r.max_rel_err());
        kinked += r.kinked();
        if !r.passed() {
            failures.push(format!("vae seed {seed}: {r}"));
        }

        let gcfg = GlobalDenoiserConfig {
            d_z,
            hidden: diff_cfg.global_hidden,
            blocks: diff_cfg.global_blocks,
            time_dim: diff_cfg.time_dim,
        };
        let mut global = GlobalDenoiser::new(gcfg, &mut rng)?;
        perturb(&mut global, &mut rng, 0.1);
        let z = normal_tensor(&mut rng, &[4, d_z]);
        let eps = normal_tensor(&mut rng, &[4, d_z]);
        let ts: Vec<usize> = (0..4).map(|_| rng.random_range(1..=200)).collect();
        let mut g = global.zeros_like();
        global.loss(&z, &ts, &eps, Some(&mut g))?;
        let r = grad_check(&global, &g, |m| m.loss(&z, &ts, &eps, None).unwrap(), opts);
        worst_global = worst_global.max(r.max_rel_err());
        kinked += r.kinked();
        if !r.passed() {
            failures.push(format!("global seed {seed}: {r}"));
        }

        let pcfg = PointDenoiserConfig { d_h, d_z, parts: 2, hidden: diff_cfg.point_hidden, time_dim: diff_cfg.time_dim };
        let mut point = PointDenoiser::new(pcfg, &mut rng)?;
        perturb(&mut point, &mut rng, 0.1);
        let h = normal_tensor(&mut rng, &[n, d_h]);
        let eps = normal_tensor(&mut rng, &[n, d_h]);
        let z0: Vec<f64> = (0..d_z).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = rng.random_range(1..=200);
        let mut g = point.zeros_like();
        let terms = point.loss(&h, t, &z0, &eps, Some(&labels[..]), 1.0, Some(&mut g))?;
        if terms.ce.is_none() {
            bail!("labeled point loss has no CE term");
        }
        let r = grad_check(&point, &g, |m| m.loss(&h, t, &z0, &eps, Some(&labels[..]), 1.0, None).unwrap().total, opts);
        worst_point = worst_point.max(r.max_rel_err());
        kinked += r.kinked();
        if !r.passed() {
            failures.push(format!("point seed {seed}: {r}"));
        }
    }
    let mut detail = format!(
        "3 seeds, h 1e-4; max rel err vae {worst_vae:.1e}, global {worst_global:.1e}, point+ce {worst_point:.1e}; {kinked} entries straddled a kink"
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; {f}"));
    }
    outcome(failures.is_empty(), detail)
}

fn schedule_statistics() -> Result<Outcome> {
    let schedule = NoiseSchedule::new(ScheduleConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let n = 100_000;
    let x0 = Tensor::new(vec![n], vec![1.5; n])?;
    let mut worst = 0.0f64;
    for t in [1, schedule.steps() / 2, schedule.steps()] {
        let eps = normal_tensor(&mut rng, &[n]);
        let xt = schedule.q_sample(&x0, t, &eps)?;
        let mean = xt.data().iter().sum::<f64>() / n as f64;
        let var = xt.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        worst = worst.max((var / (1.0 - schedule.alpha_bar(t)) - 1.0).abs());
    }
    let steps = schedule.steps();
    let draws = 200_000;
    let mut counts = vec![0usize; steps + 1];
    for _ in 0..draws {
        counts[schedule.sample_t(&mut rng)] += 1;
    }
    let expected = draws as f64 / steps as f64;
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let crit = ChiSquared::new((steps - 1) as f64)?.inverse_cdf(0.99);
    outcome(
        worst < 0.02 && chi2 < crit && counts[0] == 0,
        format!("variance rel err {:.2}% at t=1,{},{steps}; χ² {chi2:.1} < {crit:.1}", 100.0 * worst, steps / 2),
    )
}

struct Toy {
    train: PointCloudSet,
    held: PointCloudSet,
    model: LatentModel,
    vae_curve: LossCurve,
    diff_curve: LossCurve,
}

fn stick_ball_data() -> Result<(PointCloudSet, PointCloudSet)> {
    let all = synth_set(&ShapeFamilyConfig::stick_ball(POINTS, DATA_SEED), 300)?;
    let train = all.select("train", &(0..200).collect::<Vec<_>>());
    let held = all.select("held-out", &(200..300).collect::<Vec<_>>());
    Ok((train, held))
}

fn stages(semi: bool, fraction: f64) -> (VaeStage, DiffusionStage) {
    let mut vae = VaeStage::default();
    vae.train.seed = TRAIN_SEED;
    vae.train.semi_supervised = semi;
    vae.train.labeled_fraction = fraction;
    let mut diff = DiffusionStage::default();
    diff.train.seed = TRAIN_SEED;
    diff.train.semi_supervised = semi;
    diff.train.labeled_fraction = fraction;
    (vae, diff)
}

fn train_two_stage(set: &PointCloudSet, semi: bool, fraction: f64) -> Result<(LatentModel, LossCurve, LossCurve)> {
    let (vs, ds) = stages(semi, fraction);
    let (model, vae_curve) = train_vae_stage(set, &vs)?;
    let (model, diff_curve) = train_diffusion_stage(model, set, &ds)?;
    Ok((model, vae_curve, diff_curve))
}

fn generated(model: &LatentModel) -> Result<PointCloudSet> {
    Ok(generate(model, POINTS, 100, GEN_SEED, SampleOptions::default())?)
}

fn train_toy() -> Result<Toy> {
    let (train, held) = stick_ball_data()?;
    let (model, vae_curve, diff_curve) = train_two_stage(&train, false, 1.0)?;
    Ok(Toy { train, held, model, vae_curve, diff_curve })
}

fn end_to_end(slot: &mut Option<Toy>) -> Result<Outcome> {
    let toy = slot.insert(train_toy()?);
    let (train, held, model) = (&toy.train, &toy.held, &toy.model);
    let (vae_curve, diff_curve) = (&toy.vae_curve, &toy.diff_curve);
    let mut falling = Vec::new();
    let mut rising = Vec::new();
    for curve in [vae_curve, diff_curve] {
        for name in &curve.columns {
            let col = curve.column(name).unwrap();
            let (first, last) = (col[0], col[col.len() - 1]);
            let entry = format!("{name} {first:.3}→{last:.3}");
            if last < first {
                falling.push(entry);
            } else {
                rising.push(entry);
            }
        }
    }
    let gen = generated(model)?;
    let base = gaussian_baseline(train, 100, GEN_SEED)?;
    let nna_gen = one_nna_of(held, &gen, MetricName::OneNna)?;
    let nna_base = one_nna_of(held, &base, MetricName::OneNna)?;
    let transfer = label_transfer_miou(&gen, held)?;
    let a = rising.is_empty();
    let b = nna_base - nna_gen >= 0.20;
    let c = transfer >= 0.7;
    let detail = format!(
        "(a) {} [{}]; (b) 1-NNA(p-cd) generated {} vs gaussian {}; (c) label-transfer mIoU {transfer:.3}",
        if a { "all losses fell" } else { "some losses rose" },
        falling.iter().chain(&rising).cloned().collect::<Vec<_>>().join(", "),
        pct(nna_gen),
        pct(nna_base)
    );
    outcome(a && b && c, detail)
}

fn probe_trend(toy: &Toy) -> Result<Outcome> {
    let steps = toy.model.diffusion()?.schedule.steps();
    let parts = toy.model.vocab.len();
    let (mut early, mut late) = (0.0, 0.0);
    let clouds = &toy.held.clouds()[..50];
    for (i, cloud) in clouds.iter().enumerate() {
        let mut rng = stream_rng(700, i as u64);
        early += miou(&label_probe(&toy.model, cloud, 1, &mut rng)?, cloud.labels(), parts)?;
        late += miou(&label_probe(&toy.model, cloud, steps, &mut rng)?, cloud.labels(), parts)?;
    }
    let (early, late) = (early / clouds.len() as f64, late / clouds.len() as f64);
    outcome(early - late >= 0.15, format!("mean mIoU {early:.3} at t=1 vs {late:.3} at t={steps} over 50 clouds"))
}

fn edit_identities(toy: &Toy) -> Result<Outcome> {
    let model = &toy.model;
    let diff = model.diffusion()?;
    let steps = diff.schedule.steps();
    let mut checks = 0;
    let mut broken = Vec::new();

    for (i, cloud) in toy.held.clouds()[..4].iter().enumerate() {
        let rec = model.reconstruct(cloud)?;
        for p in 0..2u16 {
            checks += 1;
            if edit(model, cloud, &EditRequest::new(p, 0, i as u64))?.cloud != rec {
                broken.push(format!("tau 0 cloud {i} part {p}"));
            }
        }
    }

    let source = &toy.held.clouds()[0];
    let stick = source.part_points(0);
    let single = LabeledPointCloud::new(stick.clone(), 2, vec![0; stick.len() / 2], 2)?;
    let rec = model.reconstruct(&single)?;
    for tau in [1, steps / 4, steps - 1] {
        checks += 1;
        if edit(model, &single, &EditRequest::new(0, tau, 9))?.cloud != rec {
            broken.push(format!("full freeze tau {tau}"));
        }
    }

    for (i, cloud) in toy.held.clouds()[..6].iter().enumerate() {
        let p = (i % 2) as u16;
        let out = edit(model, cloud, &EditRequest::new(p, steps / 4, 20 + i as u64))?;
        checks += 1;
        if out.frozen != cloud.part_indices(p) || out.frozen.iter().any(|&j| out.cloud.labels()[j] != p) {
            broken.push(format!("frozen labels cloud {i}"));
        }
    }

    let mut rng = stream_rng(800, 0);
    let cond = sample_global(&diff.global, &diff.schedule, &mut rng)?;
    let alpha = DEFAULT_EMA_ALPHA;
    let s = sample_points(&diff.point, &diff.schedule, &cond, 64, alpha, true, &mut rng)?;
    let parts = model.vocab.len();
    let big_t = s.steps.len() as i32;
    let mut replay_err = 0.0f64;
    for (k, v) in s.probs.data().iter().enumerate() {
        let mut closed = (1.0 - alpha).powi(big_t) / parts as f64;
        for (j, step) in s.steps.iter().enumerate() {
            closed += alpha * (1.0 - alpha).powi(big_t - 1 - j as i32) * step.data()[k];
        }
        replay_err = replay_err.max((closed - v).abs());
    }
    checks += 1;
    if replay_err > 1e-12 || s.labels != argmax_rows(&s.probs) {
        broken.push(format!("ema replay err {replay_err:.1e}"));
    }

    let mut detail = format!("{checks} identities checked; ema closed-form err {replay_err:.1e}");
    if !broken.is_empty() {
        detail.push_str(&format!("; broken: {}", broken.join(", ")));
    }
    outcome(broken.is_empty(), detail)
}

fn bits(curve: &LossCurve) -> Vec<Vec<u64>> {
    curve.rows.iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect()
}

fn semi_supervised(toy: &Toy) -> Result<Outcome> {
    let small = toy.train.select("small", &(0..30).collect::<Vec<_>>());
    let short = |semi: bool| -> Result<(Vec<u8>, Vec<Vec<u64>>, Vec<Vec<u64>>)> {
        let (mut vs, mut ds) = stages(semi, 1.0);
        vs.train.epochs = 3;
        ds.train.epochs = 3;
        let (model, vc) = train_vae_stage(&small, &vs)?;
        let (model, dc) = train_diffusion_stage(model, &small, &ds)?;
        Ok((model.to_bytes()?, bits(&vc), bits(&dc)))
    };
    let identical = short(false)? == short(true)?;

    let mask = labeled_mask(toy.train.len(), true, 0.1, TRAIN_SEED)?;
    let subset_idx: Vec<usize> = mask.iter().enumerate().filter(|(_, &l)| l).map(|(i, _)| i).collect();
    let subset = toy.train.select("labeled-subset", &subset_idx);
    let (semi_model, _, _) = train_two_stage(&toy.train, true, 0.1)?;
    let (sub_model, _, _) = train_two_stage(&subset, false, 1.0)?;
    let nna_semi = one_nna_of(&toy.held, &generated(&semi_model)?, MetricName::OneNna)?;
    let nna_sub = one_nna_of(&toy.held, &generated(&sub_model)?, MetricName::OneNna)?;
    outcome(
        identical && nna_semi <= nna_sub + 0.05,
        format!(
            "fraction 1.0 bit-identical: {identical}; 1-NNA(p-cd) 10% + 90% unlabeled {} vs {} labeled alone {}",
            pct(nna_semi),
            subset.len(),
            pct(nna_sub)
        ),
    )
}

fn snapshot(dir: &Path, out: &mut Vec<(String, Vec<u8>)>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            snapshot(&path, out)?;
        } else {
            out.push((path.display().to_string(), std::fs::read(&path)?));
        }
    }
    Ok(())
}

fn cli_pass(root: &Path) -> Result<(Vec<(String, Vec<u8>)>, Vec<String>)> {
    let p = |name: &str| root.join(name).display().to_string();
    let (data, vae, model) = (p("data"), p("v.slnk"), p("m.slnk"));
    let input = root.join("data").join("cloud_000000.lpc").display().to_string();
    let runs: Vec<Vec<String>> = [
        vec!["synth", "--count", "24", "--points", "48", "--seed", "4", "-o", &data],
        vec!["split", "--input", &data, "--seed", "4", "-o", &p("split")],
        vec!["attack", "--donors", &data, "--mode", "centroid-snap", "--count", "8", "--seed", "4", "-o", &p("attack")],
        vec!["train-vae", "--data", &data, "--epochs", "2", "--hidden", "16", "--d-z", "4", "--seed", "4", "-o", &vae],
        vec![
            "train-diffusion", "--data", &data, "--checkpoint", &vae, "--epochs", "2", "--steps", "20", "--hidden", "16",
            "--seed", "4", "-o", &model,
        ],
        vec!["generate", "--checkpoint", &model, "--count", "6", "--n", "48", "--seed", "4", "--threads", "2", "-o", &p("gen")],
        vec!["edit", "--checkpoint", &model, "--input", &input, "--freeze-part", "stick", "--tau", "8", "--seed", "4", "-o", &p("e.lpc")],
        vec!["reconstruct", "--checkpoint", &model, "--input", &input, "-o", &p("r.lpc")],
        vec![
            "evaluate", "--real", &data, "--gen", &p("gen"), "--distance", "pcd", "--metrics", "1nna,cov,mmd,miou",
            "--seed", "4", "-o", &p("report.json"), "--save-matrices", &p("mats"),
        ],
    ]
    .into_iter()
    .map(|args| args.into_iter().map(String::from).collect())
    .collect();
    let mut stdout = Vec::new();
    for args in &runs {
        let out = Command::new(env!("CARGO_BIN_EXE_pcgen")).args(args).env_remove("PCGEN_THREADS").output()?;
        if !out.status.success() {
            bail!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr));
        }
        stdout.push(String::from_utf8(out.stdout)?);
    }
    let mut files = Vec::new();
    snapshot(root, &mut files)?;
    Ok((files, stdout))
}

fn determinism() -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let first = cli_pass(tmp.path())?;
    let second = cli_pass(tmp.path())?;
    let cli_same = first == second;
    let files = first.0.len();

    let a = synth_set(&ShapeFamilyConfig::stick_ball(512, 11), 100)?;
    let b = synth_set(&ShapeFamilyConfig::stick_ball(512, 12), 100)?;
    let start = Instant::now();
    let eight = distance_matrix(&a, &b, DistanceKind::Cd, MatrixOptions { threads: 8, ..Default::default() })?;
    let secs = start.elapsed().as_secs_f64();
    let one = distance_matrix(&a, &b, DistanceKind::Cd, MatrixOptions { threads: 1, ..Default::default() })?;
    let matrix_same = eight.to_bytes() == one.to_bytes();
    outcome(
        cli_same && matrix_same && secs < 30.0,
        format!(
            "9 CLI commands rerun: {files} output files {}; 100×100 n=512 cd matrix {secs:.1} s on 8 threads, {} to 1 thread",
            if cli_same { "byte-identical" } else { "differ" },
            if matrix_same { "byte-identical" } else { "different" }
        ),
    )
}

fn main() {
    println!("acceptance: {} ({} cpus)", env!("CARGO_PKG_VERSION"), std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut results = Vec::new();
    results.push(report(1, "distance oracles", distance_oracles));
    results.push(report(2, "metric oracles", metric_oracles));
    results.push(report(3, "recombination attack", recombination));
    results.push(report(4, "gradient integrity", gradient_checks));
    results.push(report(5, "schedule statistics", schedule_statistics));
    let mut toy = None;
    results.push(report(6, "end-to-end toy training", || end_to_end(&mut toy)));
    if toy.is_none() && (7..=9).any(selected) {
        match train_toy() {
            Ok(t) => toy = Some(t),
            Err(e) => println!("toy model unavailable: {e:#}"),
        }
    }
    let need = || toy.as_ref().ok_or_else(|| anyhow!("toy model unavailable"));
    results.push(report(7, "label probe trend", || probe_trend(need()?)));
    results.push(report(8, "edit identities", || edit_identities(need()?)));
    results.push(report(9, "semi-supervised plumbing", || semi_supervised(need()?)));
    results.push(report(10, "determinism and performance", determinism));
    let ran: Vec<(usize, bool)> = results.into_iter().enumerate().filter_map(|(i, r)| r.map(|p| (i + 1, p))).collect();
    let failed: Vec<String> = ran.iter().filter(|(_, p)| !p).map(|(i, _)| i.to_string()).collect();
    println!("acceptance: {}/{} passed", ran.len() - failed.len(), ran.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {}", failed.join(", "));
        if std::env::var("PCGEN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
