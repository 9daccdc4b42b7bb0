//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use curricula_core::bundled::{published_grid, published_matrix, published_table, score_text, title_dir, Table, BUNDLED_TITLES};
use curricula_core::design::{load_design, FactorialDesign, VariantId};
use curricula_core::scores::{
    build_transfer_matrix, ingest_with_design, quantile, Grid, ScoreError, ScoreKind, ScoreTable, Strategy,
    StrategySummary, TransferMatrix,
};
use curricula_rl::agent::AgentParams;
use curricula_rl::harness::{transfer_experiment, ExperimentConfig};

use crate::analysis::{
    anova_report, deviations_csv, normalization_deviations, normalize_observations, per_target_csv,
    strategies_csv, strategy_summaries, AnovaReport,
};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{Format, Output};
use crate::svg;
use crate::{AnovaArgs, Cli, Command, IngestArgs, ReportArgs, RunMiniArgs, StrategiesArgs, TransferArgs};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Strategy check: top3 median normalized score must exceed this.
pub const TOP3_THRESHOLD: f64 = 40.0;

struct Ctx {
    config: Config,
    out: Output,
    seed: u64,
    manifest: RunManifest,
}

impl Ctx {
    fn finish(mut self) -> CliResult<()> {
        self.manifest.param("out", self.out.dir.display());
        self.manifest.param("seed", self.seed);
        self.manifest.param("format", self.out.format);
        self.manifest.scan_outputs(&self.out.dir)?;
        self.manifest.write(&self.out.dir)?;
        Ok(())
    }
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let out_dir: PathBuf = match cli.out {
        Some(p) => p,
        None => config.raw("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
    };
    let format = config.resolve(cli.format, "format", Format::Csv)?;
    let seed = config.resolve(cli.seed, "seed", 0u64)?;
    let name = match &cli.command {
        Command::Ingest(_) => "ingest",
        Command::Anova(_) => "anova",
        Command::Transfer(_) => "transfer",
        Command::Strategies(_) => "strategies",
        Command::RunMini(_) => "run-mini",
        Command::Report(_) => "report",
    };
    warn_unknown_keys(&config, name);
    let mut manifest = RunManifest::new(name);
    if let Some(p) = &cli.config {
        manifest.input_file(p)?;
    }
    let mut ctx = Ctx {
        config,
        out: Output::new(&out_dir, format)?,
        seed,
        manifest,
    };
    let outcome = match cli.command {
        Command::Ingest(a) => ingest(&mut ctx, a),
        Command::Anova(a) => anova(&mut ctx, a),
        Command::Transfer(a) => transfer(&mut ctx, a),
        Command::Strategies(a) => strategies(&mut ctx, a),
        Command::RunMini(a) => run_mini(&mut ctx, a),
        Command::Report(a) => report(&mut ctx, a),
    };
    // Outputs and manifest are written even when a check fails.
    match outcome {
        Ok(()) => ctx.finish(),
        Err(e @ CliError::Assertion(_)) => {
            ctx.finish()?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

const GLOBAL_KEYS: [&str; 3] = ["out", "seed", "format"];
const AGENT_KEYS: [&str; 17] = [
    "gamma",
    "n_step",
    "learning_rate",
    "epsilon_start",
    "epsilon_end",
    "epsilon_anneal_steps",
    "eval_epsilon",
    "eval_episodes",
    "target_update_period",
    "replay_capacity",
    "replay_initial",
    "batch_size",
    "sticky_p",
    "use_prioritized",
    "episode_limit",
    "curve_points",
    "finetune_learning_rate",
];
const RUN_KEYS: [&str; 8] = [
    "expert_budget",
    "finetune_budget",
    "seeds",
    "grid",
    "finetune_seeds",
    "workers",
    "alpha",
    "finetune_anneal_steps",
];

fn warn_unknown_keys(config: &Config, command: &str) {
    for k in config.keys() {
        let known = GLOBAL_KEYS.contains(&k)
            || RUN_KEYS.contains(&k)
            || AGENT_KEYS.contains(&k)
            || k == "classical"
            || k == "finetune_replay_initial";
        if !known {
            log::warn!("{command}: unused config key `{k}`");
        }
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Attaches the file name to parse errors (`file:line: reason`).
fn located(path: &str, e: ScoreError) -> CliError {
    match e {
        ScoreError::Parse { line, reason } => CliError::Data(format!("{path}:{line}: {reason}")),
        other => CliError::Data(format!("{path}: {other}")),
    }
}

fn read_table(ctx: &mut Ctx, path: &Path, design: &FactorialDesign, kind: ScoreKind) -> CliResult<ScoreTable> {
    let text = read_file(path)?;
    ctx.manifest.input_file(path)?;
    ingest_with_design(text.as_bytes(), design, kind).map_err(|e| located(&path.display().to_string(), e))
}

fn read_grid(ctx: &mut Ctx, path: &Path, design: &FactorialDesign) -> CliResult<Grid> {
    let text = read_file(path)?;
    ctx.manifest.input_file(path)?;
    Grid::from_csv(text.as_bytes(), design).map_err(|e| located(&path.display().to_string(), e))
}

fn is_grid(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with("target\\source"))
}

fn bundled_table(name: &str) -> CliResult<Table> {
    Table::ALL
        .into_iter()
        .find(|t| t.file_stem() == name)
        .ok_or_else(|| {
            let stems: Vec<&str> = Table::ALL.iter().map(|t| t.file_stem()).collect();
            CliError::Usage(format!("unknown bundled table `{name}` (one of {})", stems.join(", ")))
        })
}

fn bundled_name(title: &str, table: Table) -> String {
    format!(
        "bundled:{}/{}/{}",
        curricula_core::bundled::DATA_VERSION,
        title_dir(title).unwrap_or(title),
        table.file_stem()
    )
}

fn ingest(ctx: &mut Ctx, a: IngestArgs) -> CliResult<()> {
    let design = load_design(&a.title)?;
    let kind: ScoreKind = a.kind.parse().map_err(CliError::Usage)?;
    if a.paths.is_empty() && a.bundled.is_empty() {
        return Err(CliError::Usage("nothing to ingest: give files or --bundled".into()));
    }
    let mut inputs: Vec<(String, String, String)> = Vec::new();
    for name in &a.bundled {
        let table = bundled_table(name)?;
        let text = score_text(&a.title, table)
            .ok_or_else(|| CliError::Usage(format!("no bundled tables for {}", a.title)))?;
        ctx.manifest.input_bytes(&bundled_name(&a.title, table), text.as_bytes());
        inputs.push((name.clone(), bundled_name(&a.title, table), text.to_string()));
    }
    for path in &a.paths {
        let text = read_file(path)?;
        ctx.manifest.input_file(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Usage(format!("{}: no file name", path.display())))?;
        inputs.push((stem, path.display().to_string(), text));
    }
    let mut written: Vec<String> = Vec::new();
    for (stem, origin, text) in inputs {
        if written.contains(&stem) {
            return Err(CliError::Usage(format!("two inputs would both be written as `{stem}`")));
        }
        if is_grid(&text) {
            let grid = Grid::from_csv(text.as_bytes(), &design).map_err(|e| located(&origin, e))?;
            let path = ctx.out.table(&stem, &grid.to_csv())?;
            println!("{origin}: {}x{} grid -> {}", grid.targets.len(), grid.sources.len(), path.display());
        } else {
            let kind = match bundled_table(&stem) {
                Ok(t) if origin.starts_with("bundled:") => published_table(&a.title, t)?.kind,
                _ => kind,
            };
            let table = ingest_with_design(text.as_bytes(), &design, kind).map_err(|e| located(&origin, e))?;
            let path = ctx.out.table(&stem, &table.to_csv())?;
            println!("{origin}: {} variants ({}) -> {}", table.len(), table.kind, path.display());
        }
        written.push(stem);
    }
    ctx.manifest.param("title", &a.title);
    ctx.manifest.param("kind", kind);
    Ok(())
}

fn write_anova(out: &Output, stem: &str, report: &AnovaReport) -> CliResult<()> {
    out.table(stem, &report.table.to_csv())?;
    out.file(&format!("{stem}.txt"), &report.to_text())?;
    out.table(&format!("{stem}_posthoc"), &report.posthoc_csv())?;
    out.table(&format!("{stem}_residual_quantiles"), &report.quantiles_csv())?;
    out.file(
        &format!("{stem}_quantiles.svg"),
        &svg::quantile_plot(&report.quantiles, &format!("{}: residual quantiles", report.title)),
    )?;
    Ok(())
}

fn anova(ctx: &mut Ctx, a: AnovaArgs) -> CliResult<()> {
    let design = load_design(&a.title)?;
    let alpha = ctx.config.resolve(a.alpha, "alpha", DEFAULT_ALPHA)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha {alpha} outside (0, 1)")));
    }
    let classical = a.classical || ctx.config.get::<bool>("classical")?.unwrap_or(false);
    let table = read_table(ctx, &a.scores, &design, ScoreKind::Expert)?;
    let mut obs = table.observations();
    if let Some(p) = &a.normalize_by {
        let expert = read_table(ctx, p, &design, ScoreKind::Expert)?;
        obs = normalize_observations(&obs, &expert)?;
    }
    let report = anova_report(&design, &obs, !classical, alpha)?;
    write_anova(&ctx.out, "anova", &report)?;
    print!("{}", report.to_text());
    ctx.manifest.param("title", &a.title);
    ctx.manifest.param("alpha", alpha);
    ctx.manifest.param("covariance", if classical { "classical" } else { "hc3" });
    ctx.manifest.param("normalized", a.normalize_by.is_some());
    Ok(())
}

fn parse_eval(spec: &str) -> CliResult<(VariantId, PathBuf)> {
    let (src, file) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--eval `{spec}`: expected SRC=FILE")))?;
    let src: VariantId = src.trim().parse().map_err(|e| CliError::Usage(format!("--eval `{spec}`: {e}")))?;
    Ok((src, PathBuf::from(file)))
}

fn write_matrix(out: &Output, matrix: &TransferMatrix) -> CliResult<()> {
    out.table("transfer_raw", &matrix.raw.to_csv())?;
    out.table("transfer_normalized", &matrix.normalized.to_csv())?;
    out.file(
        "heatmap.svg",
        &svg::heatmap(&matrix.normalized, &format!("{}: normalized zero-shot score", matrix.title), 100.0),
    )?;
    Ok(())
}

fn transfer(ctx: &mut Ctx, a: TransferArgs) -> CliResult<()> {
    let design = load_design(&a.title)?;
    let expert = match (&a.expert, a.bundled) {
        (Some(p), _) => read_table(ctx, p, &design, ScoreKind::Expert)?,
        (None, _) => {
            let text = score_text(&a.title, Table::Expert)
                .ok_or_else(|| CliError::Usage(format!("no bundled tables for {}", a.title)))?;
            ctx.manifest.input_bytes(&bundled_name(&a.title, Table::Expert), text.as_bytes());
            published_table(&a.title, Table::Expert)?
        }
    };
    let mut evals: BTreeMap<VariantId, ScoreTable> = BTreeMap::new();
    if a.bundled {
        let text = score_text(&a.title, Table::TransferRaw).expect("bundled title");
        ctx.manifest.input_bytes(&bundled_name(&a.title, Table::TransferRaw), text.as_bytes());
        evals.extend(published_grid(&a.title, Table::TransferRaw)?.source_tables(&a.title));
    }
    if let Some(p) = &a.raw_matrix {
        evals.extend(read_grid(ctx, p, &design)?.source_tables(&a.title));
    }
    for spec in &a.evals {
        let (src, path) = parse_eval(spec)?;
        if evals.contains_key(&src) {
            return Err(CliError::Usage(format!("source {src} given twice")));
        }
        let table = read_table(ctx, &path, &design, ScoreKind::ZeroShotFrom(src))?;
        evals.insert(src, table);
    }
    if evals.is_empty() {
        return Err(CliError::Usage("no evaluations: give --eval, --raw-matrix or --bundled".into()));
    }
    let matrix = build_transfer_matrix(&expert, &evals)?;
    write_matrix(&ctx.out, &matrix)?;
    println!(
        "{}: {} targets x {} sources -> {}",
        a.title,
        matrix.targets().len(),
        matrix.sources().len(),
        ctx.out.dir.display()
    );
    ctx.manifest.param("title", &a.title);
    Ok(())
}

fn write_strategies(out: &Output, matrix: &TransferMatrix, summaries: &[StrategySummary]) -> CliResult<()> {
    out.table("strategies", &strategies_csv(summaries))?;
    out.table("strategies_per_target", &per_target_csv(summaries))?;
    out.file(
        "boxplot.svg",
        &svg::boxplot(summaries, &format!("{}: zero-shot normalized score by strategy", matrix.title)),
    )?;
    Ok(())
}

fn median_of(summaries: &[StrategySummary], s: Strategy) -> Option<f64> {
    summaries.iter().find(|x| x.strategy == s).map(|x| x.median)
}

fn strategies(ctx: &mut Ctx, a: StrategiesArgs) -> CliResult<()> {
    let design = load_design(&a.title)?;
    let matrix = match &a.matrix {
        Some(p) => TransferMatrix::from_normalized(&a.title, read_grid(ctx, p, &design)?),
        None => {
            let text = score_text(&a.title, Table::TransferNormalized)
                .ok_or_else(|| CliError::Usage(format!("no bundled tables for {}", a.title)))?;
            ctx.manifest.input_bytes(&bundled_name(&a.title, Table::TransferNormalized), text.as_bytes());
            published_matrix(&a.title)?
        }
    };
    if !matrix.sources().iter().any(|s| s.is_default()) {
        return Err(CliError::Data(format!("matrix has no {} column", VariantId::DEFAULT)));
    }
    let (summaries, _) = strategy_summaries(&matrix);
    write_strategies(&ctx.out, &matrix, &summaries)?;
    for s in &summaries {
        println!(
            "{:<8} median {:>8.2}  quartiles [{:.2}, {:.2}]  targets {}",
            s.strategy.to_string(),
            s.median,
            s.lower_quartile,
            s.upper_quartile,
            s.per_target.len()
        );
    }
    ctx.manifest.param("title", &a.title);
    let check = median_of(&summaries, Strategy::Top3);
    let pass = check.is_some_and(|m| m > TOP3_THRESHOLD);
    match check {
        Some(m) => println!(
            "check: top3 median {m:.2} > {TOP3_THRESHOLD}: {}",
            if pass { "PASS" } else { "FAIL" }
        ),
        None => println!("check: top3 median unavailable: FAIL"),
    }
    if !pass && !a.no_assert {
        return Err(CliError::Assertion(format!("{}: top3 median not above {TOP3_THRESHOLD}", a.title)));
    }
    Ok(())
}

fn agent_params(config: &Config) -> CliResult<AgentParams> {
    let mut p = AgentParams::default();
    macro_rules! set {
        ($($key:literal => $field:expr),* $(,)?) => {
            $( if let Some(v) = config.get($key)? { $field = v; } )*
        };
    }
    set! {
        "gamma" => p.gamma,
        "n_step" => p.n_step,
        "learning_rate" => p.learning_rate,
        "epsilon_start" => p.epsilon.start,
        "epsilon_end" => p.epsilon.end,
        "epsilon_anneal_steps" => p.epsilon.anneal_steps,
        "eval_epsilon" => p.eval_epsilon,
        "eval_episodes" => p.eval_episodes,
        "target_update_period" => p.target_update_period,
        "replay_capacity" => p.replay_capacity,
        "replay_initial" => p.replay_initial,
        "batch_size" => p.batch_size,
        "sticky_p" => p.sticky_p,
        "use_prioritized" => p.use_prioritized,
        "episode_limit" => p.episode_limit,
        "curve_points" => p.curve_points,
        "finetune_learning_rate" => p.finetune_learning_rate,
        "finetune_anneal_steps" => p.finetune_anneal_steps,
        "finetune_replay_initial" => p.finetune_replay_initial,
    }
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(p)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile(&v, 0.5))
}

/// Per-variant finetuned and scratch medians.
pub fn finetune_vs_scratch_csv(finetuned: &ScoreTable, scratch: &ScoreTable) -> (String, usize, usize) {
    let mut out = String::from("variant,finetuned_median,scratch_median,finetuned_ge_scratch\n");
    let (mut wins, mut total) = (0, 0);
    for (v, f) in finetuned.iter() {
        if let (Some(fm), Some(sm)) = (median(f), scratch.get(v).and_then(median)) {
            total += 1;
            wins += (fm >= sm) as usize;
            let _ = writeln!(out, "{v},{fm},{sm},{}", fm >= sm);
        }
    }
    (out, wins, total)
}

fn anova_or_note(out: &Output, stem: &str, design: &FactorialDesign, obs: &[(VariantId, f64)], alpha: f64) -> CliResult<Option<AnovaReport>> {
    match anova_report(design, obs, true, alpha) {
        Ok(r) => {
            write_anova(out, stem, &r)?;
            Ok(Some(r))
        }
        Err(e) => {
            log::warn!("{stem}: {e}");
            out.file(&format!("{stem}.txt"), &format!("ANOVA not computed: {e}\n"))?;
            Ok(None)
        }
    }
}

fn run_mini(ctx: &mut Ctx, a: RunMiniArgs) -> CliResult<()> {
    let c = &ctx.config;
    let seeds = c.resolve(a.seeds, "seeds", 3usize)?;
    let cfg = ExperimentConfig {
        expert_budget: c.resolve(a.expert_budget, "expert_budget", 200_000u64)?,
        finetune_budget: c.resolve(a.finetune_budget, "finetune_budget", 10_000u64)?,
        expert_seeds: c.resolve(a.grid, "grid", seeds)?,
        keep: seeds,
        finetune_seeds: c.resolve(a.finetune_seeds, "finetune_seeds", seeds)?,
        base_seed: ctx.seed,
        workers: c.resolve(a.workers, "workers", 0usize)?,
        checkpoint_dir: Some(ctx.out.dir.join("checkpoints")),
    };
    let alpha = c.resolve(a.alpha, "alpha", DEFAULT_ALPHA)?;
    if cfg.expert_seeds < cfg.keep {
        return Err(CliError::Usage(format!(
            "--grid {} is smaller than --seeds {}",
            cfg.expert_seeds, cfg.keep
        )));
    }
    let params = agent_params(c)?;
    let design = load_design("MiniFreeway")?;
    let started = std::time::Instant::now();
    let result = transfer_experiment(&design, &params, &cfg)?;
    let elapsed = started.elapsed().as_secs_f64();

    let out = &ctx.out;
    out.table("expert", &result.experts.to_csv())?;
    out.table("zero_shot_default", &result.zero_shot[&VariantId::DEFAULT].to_csv())?;
    out.table("finetuned", &result.finetuned.to_csv())?;
    out.table("scratch", &result.scratch.to_csv())?;
    let (fvs, wins, total) = finetune_vs_scratch_csv(&result.finetuned, &result.scratch);
    out.table("finetune_vs_scratch", &fvs)?;
    let mut selected = String::from("variant,rank,seed_index,score\n");
    for (v, picks) in &result.selected {
        let scores = result.experts.get(*v).unwrap_or(&[]);
        for (rank, (i, s)) in picks.iter().zip(scores).enumerate() {
            let _ = writeln!(selected, "{v},{rank},{i},{s}");
        }
    }
    out.table("selected_experts", &selected)?;
    let mut curves = String::from("variant,seed_index,step,eval_return\n");
    for ((v, i), curve) in &result.curves {
        for (step, r) in curve {
            let _ = writeln!(curves, "{v},{i},{step},{r}");
        }
    }
    out.table("curves", &curves)?;
    write_matrix(out, &result.matrix)?;
    let (summaries, _) = strategy_summaries(&result.matrix);
    write_strategies(out, &result.matrix, &summaries)?;

    let expert_anova = anova_or_note(out, "anova_expert", &design, &result.experts.observations(), alpha)?;
    let zs = normalize_observations(&result.zero_shot[&VariantId::DEFAULT].observations(), &result.experts);
    match zs {
        Ok(obs) => {
            anova_or_note(out, "anova_zero_shot", &design, &obs, alpha)?;
        }
        Err(e) => {
            log::warn!("anova_zero_shot: {e}");
            out.file("anova_zero_shot.txt", &format!("ANOVA not computed: {e}\n"))?;
        }
    }

    println!(
        "run-mini: {} variants, {} kept experts each, {:.1}s ({} runs resumed)",
        design.variant_count(),
        cfg.keep,
        elapsed,
        result.resumed
    );
    println!(
        "transfer matrix {}x{}",
        result.matrix.targets().len(),
        result.matrix.sources().len()
    );
    if let Some(r) = &expert_anova {
        let df: Vec<String> = r.table.df_column().iter().map(|d| d.to_string()).collect();
        println!("expert ANOVA df: {}", df.join(","));
    }
    println!("finetuned median >= scratch median on {wins} of {total} variants");
    for s in &summaries {
        println!("strategy {:<8} median {:.2}", s.strategy.to_string(), s.median);
    }

    let m = &mut ctx.manifest;
    m.param("expert_budget", cfg.expert_budget);
    m.param("finetune_budget", cfg.finetune_budget);
    m.param("seeds", cfg.keep);
    m.param("grid", cfg.expert_seeds);
    m.param("finetune_seeds", cfg.finetune_seeds);
    m.param("workers", cfg.workers);
    m.param("alpha", alpha);
    m.param("agent", format!("{params:?}"));
    Ok(())
}

fn report_title(out: &Output, title: &str, tolerance: f64, md: &mut String) -> CliResult<usize> {
    let dir = out.sub(title_dir(title).expect("bundled title"))?;
    let devs = normalization_deviations(title)?;
    dir.table("normalization_check", &deviations_csv(&devs, tolerance))?;
    let expert = published_table(title, Table::Expert)?;
    let raw = published_grid(title, Table::TransferRaw)?;
    let recomputed = build_transfer_matrix(&expert, &raw.source_tables(title))?;
    dir.table("transfer_normalized_recomputed", &recomputed.normalized.to_csv())?;
    let published = published_matrix(title)?;
    dir.file(
        "heatmap.svg",
        &svg::heatmap(&published.normalized, &format!("{title}: normalized zero-shot score"), 100.0),
    )?;
    let (summaries, _) = strategy_summaries(&published);
    write_strategies(&dir, &published, &summaries)?;

    let beyond: Vec<_> = devs.iter().filter(|d| !d.within(tolerance)).collect();
    let max = devs.iter().map(|d| d.difference().abs()).fold(0.0, f64::max);
    let _ = writeln!(md, "## {title}\n");
    let _ = writeln!(
        md,
        "Normalized cells checked: {}; largest |difference| {:.3}; beyond ±{tolerance}: {}.\n",
        devs.len(),
        max,
        beyond.len()
    );
    if !beyond.is_empty() {
        let _ = writeln!(md, "| table | target | source | published | recomputed |\n|---|---|---|---|---|");
        for d in &beyond {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {:.2} |",
                d.table,
                d.target,
                d.source.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                d.published,
                d.recomputed
            );
        }
        md.push('\n');
    }
    strategy_markdown(md, &summaries);
    Ok(beyond.len())
}

fn strategy_markdown(md: &mut String, summaries: &[StrategySummary]) {
    let _ = writeln!(md, "| strategy | median | lower quartile | upper quartile |\n|---|---|---|---|");
    for s in summaries {
        let _ = writeln!(
            md,
            "| {} | {:.2} | {:.2} | {:.2} |",
            s.strategy, s.median, s.lower_quartile, s.upper_quartile
        );
    }
    md.push('\n');
}

fn report(ctx: &mut Ctx, a: ReportArgs) -> CliResult<()> {
    let titles: Vec<String> = if a.title.is_empty() {
        BUNDLED_TITLES.iter().map(|s| s.to_string()).collect()
    } else {
        a.title.clone()
    };
    let mut md = String::from("# Transfer study report\n\n");
    let mut beyond = 0;
    for t in &titles {
        if title_dir(t).is_none() {
            return Err(CliError::Usage(format!("no bundled tables for `{t}`")));
        }
        for table in Table::ALL {
            let text = score_text(t, table).expect("bundled title");
            ctx.manifest.input_bytes(&bundled_name(t, table), text.as_bytes());
        }
        beyond += report_title(&ctx.out, t, a.tolerance, &mut md)?;
    }
    if let Some(run) = &a.run {
        let design = load_design("MiniFreeway")?;
        let grid = read_grid(ctx, &run.join("transfer_normalized.csv"), &design)?;
        let matrix = TransferMatrix::from_normalized("MiniFreeway", grid);
        let (summaries, _) = strategy_summaries(&matrix);
        let finetuned = read_table(ctx, &run.join("finetuned.csv"), &design, ScoreKind::FinetunedFrom(VariantId::DEFAULT))?;
        let scratch = read_table(ctx, &run.join("scratch.csv"), &design, ScoreKind::ScratchReducedBudget)?;
        let (_, wins, total) = finetune_vs_scratch_csv(&finetuned, &scratch);
        let _ = writeln!(md, "## MiniFreeway run `{}`\n", run.display());
        let _ = writeln!(md, "Finetuned median >= scratch median on {wins} of {total} variants.\n");
        strategy_markdown(&mut md, &summaries);
    }
    ctx.out.file("report.md", &md)?;
    print!("{md}");
    ctx.manifest.param("titles", titles.join(","));
    ctx.manifest.param("tolerance", a.tolerance);
    if a.strict && beyond > 0 {
        return Err(CliError::Assertion(format!(
            "{beyond} normalized cells differ by more than {}",
            a.tolerance
        )));
    }
    Ok(())
}
