use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use flagtune::ablation::{ablation_path, path_csv, render_path, AblationError, AblationOptions};
use flagtune::configure::{ConfigureError, SmboOptions};
use flagtune::paramspace::{parse_space, Configuration, ParameterSpace};
use flagtune::refine::{
    apply_proposals, crash_scan, propose_refinements, render_proposals, ProposalOptions, RefineError, ScanOptions,
};
use flagtune::report::{
    emit_plot_data, rank_by_validation, ranking_csv, render_table, run_campaign, table_csv, table_from_runs,
    validate_configurations, write_campaign, CampaignSpec, PlotSource, ReportError, Strategy, ValidationTable,
    DEFAULT_LABEL,
};
use flagtune::runner::{read_records, write_records, ProcessEvaluator, RunRecord, RunResult, ScenarioSpec};

use crate::{AblateArgs, Cli, Command, PlotArgs, PlotKind, RankArgs, ScanArgs, SpaceCommand, StrategyArg, TuneArgs, ValidateArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Harness(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Harness(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Harness(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        usage(e)
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        usage(e)
    }
}

impl From<ConfigureError> for CliError {
    fn from(e: ConfigureError) -> Self {
        match e {
            ConfigureError::Harness(h) => CliError::Harness(h.to_string()),
            e => usage(e),
        }
    }
}

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::Harness(h) => CliError::Harness(h.to_string()),
            e => usage(e),
        }
    }
}

impl From<AblationError> for CliError {
    fn from(e: AblationError) -> Self {
        match e {
            AblationError::Harness(h) => CliError::Harness(h.to_string()),
            e => usage(e),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Context {
    scenario: ScenarioSpec,
    space: ParameterSpace,
    seed: u64,
    out: PathBuf,
}

fn read_space(path: &Path) -> Result<ParameterSpace> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_space(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn context(cli: &Cli) -> Result<Context> {
    let path = cli.scenario.as_ref().ok_or_else(|| usage("this command needs --scenario"))?;
    let mut scenario = ScenarioSpec::load(path).map_err(usage)?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        scenario.jobs = j;
    }
    let space = read_space(&scenario.space_file)?;
    scenario.command.check_against(&space).map_err(usage)?;
    fs::create_dir_all(&cli.out)?;
    Ok(Context {
        scenario,
        space,
        seed: cli.seed,
        out: cli.out.clone(),
    })
}

fn read_config(space: &ParameterSpace, path: &Path) -> Result<Configuration> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    space
        .parse_config(text.trim())
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Space(cmd) => space(cmd, cli.seed),
        Command::Scan(args) => scan(&context(&cli)?, args),
        Command::Tune(args) => tune(&context(&cli)?, args),
        Command::Validate(args) => validate(&context(&cli)?, args),
        Command::Rank(args) => rank(&context(&cli)?, args),
        Command::Ablate(args) => ablate(&context(&cli)?, args),
        Command::PlotData(args) => plot(&context(&cli)?, args),
    }
}

fn space(cmd: &SpaceCommand, seed: u64) -> Result<()> {
    match cmd {
        SpaceCommand::Check { file } => {
            let s = read_space(file)?;
            let conditional = s.parameters().iter().filter(|p| s.condition_for(&p.name).is_some()).count();
            println!(
                "{}: {} parameters ({} conditional), {} forbidden clauses",
                file.display(),
                s.len(),
                conditional,
                s.forbidden().len()
            );
            println!("default: {}", s.default_config());
            Ok(())
        }
        SpaceCommand::Sample { file, count } => {
            let s = read_space(file)?;
            for i in 0..*count {
                let c = s.sample_random(seed.wrapping_add(i as u64)).map_err(usage)?;
                println!("{c}");
            }
            Ok(())
        }
    }
}

fn scan(ctx: &Context, args: &ScanArgs) -> Result<()> {
    let eval = ProcessEvaluator::new(ctx.scenario.clone());
    let opts = ScanOptions {
        samples: args.samples,
        ..Default::default()
    };
    let report = crash_scan(&eval, &ctx.space, ctx.scenario.canary_instance(), &opts, ctx.seed)?;
    let crashes: String = report.crashing.iter().map(|c| format!("{c}\n")).collect();
    fs::write(ctx.out.join("crashes.txt"), crashes)?;
    let proposals = if report.crashing.is_empty() {
        Vec::new()
    } else {
        let popts = ProposalOptions {
            min_support: args.min_support,
            max_false_positive: args.max_false_positive,
        };
        propose_refinements(&ctx.space, &report, &report.non_crashing, &popts)?
    };
    let text = render_proposals(&report, &proposals);
    fs::write(ctx.out.join("proposals.txt"), &text)?;
    let name = ctx
        .scenario
        .space_file
        .file_name()
        .map_or_else(|| "space".into(), |n| n.to_string_lossy().to_string());
    let refined = apply_proposals(&ctx.space, &proposals)?;
    fs::write(ctx.out.join(format!("{name}.refined")), flagtune::paramspace::render_space(&refined))?;
    print!("{text}");
    Ok(())
}

fn write_validation(ctx: &Context, table: &ValidationTable, runs: &[(String, RunResult)]) -> Result<()> {
    let l = table.load;
    fs::write(ctx.out.join(format!("validation-load-{l}.csv")), table_csv(table))?;
    fs::write(ctx.out.join(format!("validation-load-{l}.txt")), render_table(table))?;
    let records: Vec<RunRecord> = runs.iter().map(|(label, r)| RunRecord::from_result(r, Some(label))).collect();
    write_records(fs::File::create(ctx.out.join(format!("validation-runs-load-{l}.jsonl")))?, &records)?;
    Ok(())
}

fn harness_errors(table: &ValidationTable) -> usize {
    table.rows.iter().flat_map(|r| &r.harness_errors).sum()
}

fn tune(ctx: &Context, args: &TuneArgs) -> Result<()> {
    let eval = ProcessEvaluator::new(ctx.scenario.clone());
    let loads = if args.loads.is_empty() {
        vec![ctx.scenario.jobs]
    } else {
        args.loads.clone()
    };
    let spec = CampaignSpec {
        runs: args.runs,
        validation_runs: args.validation_runs,
        load_levels: loads.clone(),
        strategy: match args.strategy {
            StrategyArg::Smbo => Strategy::Smbo(SmboOptions::standard()),
            StrategyArg::Random => Strategy::Random,
        },
        parallel: args.parallel,
        ..CampaignSpec::new(ctx.scenario.budget, ctx.seed)
    };
    let campaign = run_campaign(&eval, &ctx.scenario, &ctx.space, &spec)?;
    write_campaign(&campaign, &ctx.out)?;
    print!("{}", campaign.summary_csv());
    let Some(best) = campaign.best() else {
        let first = campaign.runs.iter().find_map(|r| r.outcome.as_ref().err()).cloned();
        return Err(CliError::Harness(first.unwrap_or_else(|| "every configurator run failed".into())));
    };
    fs::write(ctx.out.join("final.cfg"), format!("{}\n", best.incumbent))?;
    if args.no_validate {
        return Ok(());
    }
    let best_label = flagtune::report::run_label(campaign.best_training.expect("best exists"));
    let configs: Vec<(String, Configuration)> =
        campaign.incumbents().into_iter().map(|(l, r)| (l, r.incumbent.clone())).collect();
    let mut errors = 0;
    for load in loads {
        let (table, runs) = validate_configurations(
            &ctx.scenario,
            &ctx.space.default_config(),
            &configs,
            args.validation_runs,
            load,
            ctx.seed,
        )?;
        write_validation(ctx, &table, &runs)?;
        let ranking = rank_by_validation(&table, table.rows.len());
        fs::write(ctx.out.join(format!("ranking-load-{load}.csv")), ranking_csv(&ranking))?;
        let final_row = table.rows.iter().find(|r| r.config == best.incumbent).expect("incumbent validated");
        let top = ranking.rows.first().expect("non-empty ranking");
        let selection = format!(
            "final (best training): {best_label} {} validation PAR-k {}\nbest validation (optimistically biased): {} {} validation PAR-k {}\n",
            final_row.config_id,
            fmt_opt(final_row.overall),
            top.label,
            top.config_id,
            fmt_opt(top.score)
        );
        fs::write(ctx.out.join(format!("selection-load-{load}.txt")), &selection)?;
        print!("{}{selection}", render_table(&table));
        errors += harness_errors(&table);
    }
    if errors > 0 {
        return Err(CliError::Harness(format!("{errors} validation runs failed in the harness")));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

fn validate(ctx: &Context, args: &ValidateArgs) -> Result<()> {
    let mut configs = Vec::new();
    for path in &args.configs {
        let label = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().to_string());
        configs.push((label, read_config(&ctx.space, path)?));
    }
    let (table, runs) = validate_configurations(
        &ctx.scenario,
        &ctx.space.default_config(),
        &configs,
        args.runs,
        ctx.scenario.jobs,
        ctx.seed,
    )?;
    write_validation(ctx, &table, &runs)?;
    print!("{}", render_table(&table));
    let errors = harness_errors(&table);
    if errors > 0 {
        return Err(CliError::Harness(format!("{errors} validation runs failed in the harness")));
    }
    Ok(())
}

type Labelled<T> = Vec<(String, T)>;

/// Labelled runs of a validation log, with the labels in first-seen order.
fn read_log(ctx: &Context, path: &Path) -> Result<(Labelled<Configuration>, Labelled<RunResult>)> {
    let file = fs::File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let records = read_records(BufReader::new(file)).map_err(usage)?;
    let mut rows: Vec<(String, Configuration)> = Vec::new();
    let mut runs = Vec::with_capacity(records.len());
    for rec in records {
        let label = rec.label.clone().unwrap_or_else(|| rec.config.clone());
        let r = rec.into_result(&ctx.space).map_err(usage)?;
        match rows.iter().find(|(l, _)| *l == label) {
            Some((_, c)) if *c != r.spec.config => {
                return Err(usage(format!("label `{label}` names two configurations")));
            }
            Some(_) => {}
            None => rows.push((label.clone(), r.spec.config.clone())),
        }
        runs.push((label, r));
    }
    Ok((rows, runs))
}

fn rank(ctx: &Context, args: &RankArgs) -> Result<()> {
    let (mut rows, runs) = read_log(ctx, &args.log)?;
    let pos = rows
        .iter()
        .position(|(l, _)| l == DEFAULT_LABEL)
        .ok_or_else(|| usage("log has no default runs"))?;
    let default = rows.remove(pos);
    rows.insert(0, default);
    let load = runs.first().map_or(ctx.scenario.jobs, |(_, r)| r.load);
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (l, r) in &runs {
        *counts.entry((l, &r.spec.instance)).or_default() += 1;
    }
    let per_instance = counts.values().copied().max().unwrap_or(0);
    let mut errors = BTreeMap::new();
    for (l, _) in &rows {
        for inst in &ctx.scenario.instances {
            let have = counts.get(&(l.as_str(), inst.as_str())).copied().unwrap_or(0);
            if have < per_instance {
                errors.insert((l.clone(), inst.clone()), per_instance - have);
            }
        }
    }
    let table = table_from_runs(
        &ctx.scenario.objective_spec(),
        &ctx.scenario.instances,
        load,
        per_instance,
        &rows,
        &runs,
        &errors,
    )?;
    let ranking = rank_by_validation(&table, args.top);
    let csv = ranking_csv(&ranking);
    fs::write(ctx.out.join("ranking.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn ablate(ctx: &Context, args: &AblateArgs) -> Result<()> {
    let target = read_config(&ctx.space, &args.target)?;
    let eval = ProcessEvaluator::new(ctx.scenario.clone());
    let opts = AblationOptions {
        instances: args.instances.clone(),
        runs_per_eval: args.runs_per_eval,
        seed: ctx.seed,
    };
    let default = ctx.space.default_config();
    let path = match ablation_path(&eval, &ctx.scenario, &ctx.space, &default, &target, &opts) {
        Ok(p) => p,
        Err(AblationError::Stuck(partial)) => {
            fs::write(ctx.out.join("ablation.txt"), render_path(&partial))?;
            fs::write(ctx.out.join("ablation.csv"), path_csv(&partial))?;
            return Err(usage(AblationError::Stuck(partial)));
        }
        Err(e) => return Err(e.into()),
    };
    let text = render_path(&path);
    fs::write(ctx.out.join("ablation.txt"), &text)?;
    fs::write(ctx.out.join("ablation.csv"), path_csv(&path))?;
    print!("{text}");
    Ok(())
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn plot(ctx: &Context, args: &PlotArgs) -> Result<()> {
    let objective = ctx.scenario.objective_spec();
    match args.kind {
        PlotKind::Trajectory => {
            // Input: a campaign directory; merge its per-run trajectories.
            let mut names: Vec<String> = fs::read_dir(&args.input)?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().to_string())
                .filter(|n| n.starts_with("run-") && args.input.join(n).join("trajectory.csv").is_file())
                .collect();
            names.sort();
            if names.is_empty() {
                return Err(usage(format!("no run-*/trajectory.csv under {}", args.input.display())));
            }
            let mut out = String::from("run,elapsed_seconds,config_id,training_par_k,n_runs\n");
            for n in names {
                let text = fs::read_to_string(args.input.join(&n).join("trajectory.csv"))?;
                for line in text.lines().skip(1) {
                    out.push_str(&format!("{n},{line}\n"));
                }
            }
            fs::write(ctx.out.join("trajectory.csv"), out)?;
            Ok(())
        }
        PlotKind::Ecdf => {
            let (rows, runs) = read_log(ctx, &args.input)?;
            for (label, _) in rows.iter().filter(|(l, _)| args.label.as_ref().is_none_or(|x| x == l)) {
                let mine: Vec<&RunResult> = runs.iter().filter(|(l, _)| l == label).map(|(_, r)| r).collect();
                let src = PlotSource::Ecdf {
                    runs: &mine,
                    objective: &objective,
                };
                emit_plot_data(&src, &ctx.out.join(format!("ecdf-{}.csv", file_label(label))))?;
            }
            Ok(())
        }
        PlotKind::Scatter => {
            let label = args.label.as_ref().ok_or_else(|| usage("scatter needs --label"))?;
            let (_, runs) = read_log(ctx, &args.input)?;
            let pick = |want: &str| -> Vec<&RunResult> { runs.iter().filter(|(l, _)| l == want).map(|(_, r)| r).collect() };
            let (d, c) = (pick(DEFAULT_LABEL), pick(label));
            if c.is_empty() {
                return Err(usage(format!("no runs labelled `{label}`")));
            }
            let src = PlotSource::Scatter {
                default: &d,
                configured: &c,
                objective: &objective,
            };
            emit_plot_data(&src, &ctx.out.join(format!("scatter-{}.csv", file_label(label))))?;
            Ok(())
        }
    }
}
