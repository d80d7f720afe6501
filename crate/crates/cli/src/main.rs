//! `tfqka`: discrimination bounds, key-rate sweeps, session simulation and
//! network planning from the command line.
//!
//! Exit codes: 0 success, 1 validation or I/O failure, 2 usage error.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tfqka_core::discrimination::discriminate;
use tfqka_core::keyrate::{asymptotic_rate, link_rate_closed, ChannelParams};
use tfqka_core::network::{
    derive_global_key, plan_network, reconcile_network, MuPolicy, NetworkPlan, PartyGraph, PartyId,
};
use tfqka_core::selftest;
use tfqka_core::sim::{run_session, KeyBits, SessionConfig, ThreePartyKeys, DEFAULT_DARK_COUNT, DEFAULT_Y0};
use tfqka_core::Error;

use output::{emit, to_json, Table};

#[derive(Parser, Debug)]
#[command(name = "tfqka", version, about = "Twin-field multi-party quantum key agreement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Helstrom bound and closed-form minimum errors over intensity.
    Discriminate(DiscriminateArgs),
    /// Asymptotic key rate over distance or intensity.
    Keyrate(KeyrateArgs),
    /// Monte Carlo session of the three-party protocol.
    Simulate(SimulateArgs),
    /// Network planning with a reconciliation dry run.
    Plan(PlanArgs),
    /// Runs the built-in invariant checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepVar {
    #[value(name = "distance_km")]
    DistanceKm,
    Mu,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct SweepSpec {
    variable: SweepVar,
    start: f64,
    stop: f64,
    steps: usize,
}

impl SweepSpec {
    fn points(&self) -> Vec<f64> {
        (0..self.steps)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [var, start, stop, steps] = parts[..] else {
            return Err("expected var:start:stop:steps".into());
        };
        let variable = SweepVar::from_str(var, false)?;
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let (start, stop) = (num(start)?, num(stop)?);
        let steps: usize = steps.parse().map_err(|e| format!("{steps:?}: {e}"))?;
        if !(start.is_finite() && stop.is_finite() && start < stop) {
            return Err(format!("need start < stop, got {start} and {stop}"));
        }
        if steps < 2 {
            return Err(format!("need at least 2 steps, got {steps}"));
        }
        Ok(SweepSpec { variable, start, stop, steps })
    }
}

fn parse_arms(s: &str) -> Result<[f64; 4], String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 arm lengths, got {}", v.len()))
}

fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

#[derive(Args, Debug)]
struct Geometry {
    /// Total length l_A + l_B + l_B' + l_C in km, split into four equal arms.
    #[arg(long, conflicts_with = "arm_km")]
    distance_km: Option<f64>,
    /// Arm lengths l_A,l_B,l_B',l_C in km.
    #[arg(long, value_parser = parse_arms)]
    arm_km: Option<[f64; 4]>,
}

impl Geometry {
    fn arms(&self, total_override: Option<f64>) -> [f64; 4] {
        match (total_override, self.distance_km, self.arm_km) {
            (Some(l), ..) => [l / 4.0; 4],
            (None, Some(l), _) => [l / 4.0; 4],
            (None, None, Some(a)) => a,
            (None, None, None) => [0.0; 4],
        }
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct DiscriminateArgs {
    #[arg(long, default_value_t = 0.2)]
    mu: f64,
    #[arg(long)]
    sweep: Option<SweepSpec>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct KeyrateArgs {
    #[arg(long, default_value_t = 0.2)]
    mu: f64,
    /// Intensity of the BC link; defaults to --mu.
    #[arg(long)]
    mu2: Option<f64>,
    #[command(flatten)]
    geometry: Geometry,
    #[arg(long, default_value_t = 0.0)]
    ec_efficiency: f64,
    #[arg(long)]
    sweep: Option<SweepSpec>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    /// JSON session configuration; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    #[command(flatten)]
    geometry: Geometry,
    #[arg(long)]
    y0: Option<f64>,
    #[arg(long)]
    dark: Option<f64>,
    #[arg(long)]
    pulses: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ec_efficiency: Option<f64>,
    #[arg(long)]
    sweep: Option<SweepSpec>,
    /// Include the reconciled keys in JSON output.
    #[arg(long)]
    keys: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct PlanArgs {
    /// Party graph JSON: {"parties":[{"id":1,"x":0,"y":0}],"edges":[{"a":1,"b":2,"km":10}]}
    graph: PathBuf,
    #[arg(long, default_value_t = 0.2, conflicts_with = "mu_grid")]
    mu: f64,
    /// Comma-separated intensities; each segment takes its best.
    #[arg(long, value_parser = parse_grid)]
    mu_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    ec_efficiency: f64,
    /// Pulses per segment in the reconciliation dry run (0 skips it).
    #[arg(long, default_value_t = 100_000)]
    pulses: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_Y0)]
    y0: f64,
    #[arg(long, default_value_t = DEFAULT_DARK_COUNT)]
    dark: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(m) => Failure::Usage(m),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn io(msg: String) -> Failure {
    Failure::Invalid(msg)
}

fn require_format(format: Option<Format>, allowed: &[Format], default: Format) -> Result<Format, Failure> {
    let f = format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Failure::Usage(format!(
            "--format {} is not available here",
            f.to_possible_value().expect("value").get_name()
        )))
    }
}

fn write_table(table: &Table, format: Format, out: Option<&Path>) -> CmdResult {
    let text = match format {
        Format::Json => table.to_json(),
        _ => table.to_csv(),
    }
    .map_err(io)?;
    emit(&text, out).map_err(io)
}

fn check_finite(name: &str, x: f64) -> CmdResult {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

fn cmd_discriminate(args: DiscriminateArgs) -> CmdResult {
    let format = require_format(args.output.format, &[Format::Csv, Format::Json], Format::Csv)?;
    let points = match args.sweep {
        Some(s) if s.variable == SweepVar::Mu => s.points(),
        Some(_) => return Err(Failure::Usage("discriminate sweeps only over mu".into())),
        None => vec![args.mu],
    };
    let mut table = Table::new(vec!["mu", "q_helstrom", "q_pair", "q_triple", "q_helstrom_triple"]);
    for mu in points {
        let r = discriminate(mu)?;
        table.push(vec![r.mu, r.q_helstrom, r.q_closed_pair, r.q_closed_triple, r.q_helstrom_triple]);
    }
    write_table(&table, format, args.output.out.as_deref())
}

fn cmd_keyrate(args: KeyrateArgs) -> CmdResult {
    let format = require_format(args.output.format, &[Format::Csv, Format::Json], Format::Csv)?;
    check_finite("--ec-efficiency", args.ec_efficiency)?;
    if args.ec_efficiency < 0.0 {
        return Err(invalid("--ec-efficiency must be >= 0"));
    }
    let sweep_points: Vec<(Option<f64>, Option<f64>)> = match args.sweep {
        None => vec![(None, None)],
        Some(s) => match s.variable {
            SweepVar::Mu => s.points().into_iter().map(|mu| (Some(mu), None)).collect(),
            SweepVar::DistanceKm => {
                if args.geometry.arm_km.is_some() {
                    return Err(Failure::Usage("a distance sweep cannot be combined with --arm-km".into()));
                }
                s.points().into_iter().map(|l| (None, Some(l))).collect()
            }
        },
    };

    // validate every point before computing any
    let mut params = Vec::with_capacity(sweep_points.len());
    for (mu_override, total) in sweep_points {
        let mu1 = mu_override.unwrap_or(args.mu);
        let mu2 = mu_override.unwrap_or(args.mu2.unwrap_or(args.mu));
        let arms = args.geometry.arms(total);
        params.push((arms.iter().sum::<f64>(), ChannelParams::from_arm_km(mu1, mu2, arms)?));
    }

    let mut table = Table::new(vec![
        "distance_km", "mu1", "mu2", "eta1", "eta2", "sift_ab", "sift_bc", "holevo_ab", "holevo_bc", "rate_ab",
        "rate_bc", "r_infinity", "r_closed",
    ]);
    for (km, p) in params {
        let r = asymptotic_rate(&p, args.ec_efficiency)?;
        let closed = link_rate_closed(p.mu1, p.eta1, args.ec_efficiency).min(link_rate_closed(p.mu2, p.eta2, args.ec_efficiency));
        table.push(vec![
            km, p.mu1, p.mu2, p.eta1, p.eta2, r.sift_ab, r.sift_bc, r.holevo_ab, r.holevo_bc, r.rate_ab, r.rate_bc,
            r.r_infinity, closed,
        ]);
    }
    write_table(&table, format, args.output.out.as_deref())
}

fn session_config(args: &SimulateArgs) -> Result<SessionConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SessionConfig>(&text)
                .map_err(|e| invalid(format!("invalid session config {}: {e}", path.display())))?
        }
        None => SessionConfig::symmetric(0.2, 0.0, 1_000_000),
    };
    if let Some(mu) = args.mu {
        (cfg.mu_a, cfg.mu_b, cfg.mu_c) = (mu, mu, mu);
    }
    if args.geometry.distance_km.is_some() || args.geometry.arm_km.is_some() {
        cfg.arm_lengths_km = args.geometry.arms(None);
    }
    if let Some(y0) = args.y0 {
        cfg.y0 = y0;
    }
    if let Some(d) = args.dark {
        cfg.dark_count_prob = d;
    }
    if let Some(n) = args.pulses {
        cfg.n_pulses = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(f) = args.ec_efficiency {
        cfg.ec_efficiency = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    #[serde(flatten)]
    summary: tfqka_core::sim::SessionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    keys: Option<&'a ThreePartyKeys>,
}

fn session_table(s: &tfqka_core::sim::SessionSummary) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("pulses", s.config.n_pulses.to_string()),
        ("seed", s.config.seed.to_string()),
        ("mu_at_node_ab", output::format_number(s.link_ab.mu_at_node)),
        ("mu_at_node_bc", output::format_number(s.link_bc.mu_at_node)),
        ("conclusive_ab", s.stats_ab.conclusive.to_string()),
        ("conclusive_bc", s.stats_bc.conclusive.to_string()),
        ("double_clicks_ab", s.stats_ab.double_clicks.to_string()),
        ("double_clicks_bc", s.stats_bc.double_clicks.to_string()),
        ("qber_ab", output::format_number(s.qber_ab)),
        ("qber_bc", output::format_number(s.qber_bc)),
        ("sifted_rate", output::format_number(s.sifted_rate)),
        ("chi", output::format_number(s.chi)),
        ("skr_per_pulse", output::format_number(s.skr_per_pulse)),
        ("skr_bps", output::format_number(s.skr_bps)),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let base = session_config(&args)?;
    if let Some(sweep) = args.sweep {
        let format = require_format(args.output.format, &[Format::Csv, Format::Json], Format::Csv)?;
        if args.keys {
            return Err(Failure::Usage("--keys is not available for sweeps".into()));
        }
        let mut configs = Vec::new();
        for x in sweep.points() {
            let mut cfg = base.clone();
            match sweep.variable {
                SweepVar::Mu => (cfg.mu_a, cfg.mu_b, cfg.mu_c) = (x, x, x),
                SweepVar::DistanceKm => cfg.arm_lengths_km = [x / 4.0; 4],
            }
            cfg.validate()?;
            configs.push(cfg);
        }
        let mut table = Table::new(vec![
            "distance_km", "mu", "pulses", "conclusive_ab", "conclusive_bc", "qber_ab", "qber_bc", "sifted_rate", "chi",
            "skr_per_pulse", "skr_bps",
        ]);
        for cfg in configs {
            let r = run_session(&cfg)?;
            table.push(vec![
                cfg.arm_lengths_km.iter().sum(),
                cfg.mu_b,
                cfg.n_pulses as f64,
                r.stats_ab.conclusive as f64,
                r.stats_bc.conclusive as f64,
                r.qber_ab,
                r.qber_bc,
                r.sifted_rate,
                r.chi,
                r.skr_per_pulse,
                r.skr_bps,
            ]);
        }
        return write_table(&table, format, args.output.out.as_deref());
    }

    let format = require_format(args.output.format, &[Format::Json, Format::Table], Format::Json)?;
    if args.keys && format != Format::Json {
        return Err(Failure::Usage("--keys needs --format json".into()));
    }
    let r = run_session(&base)?;
    let summary = r.summary();
    let text = match format {
        Format::Table => session_table(&summary),
        _ => {
            let keys = args.keys.then(|| r.agree());
            to_json(&SimulateReport { summary, keys: keys.as_ref() }).map_err(io)?
        }
    };
    emit(&text, args.output.out.as_deref()).map_err(io)
}

#[derive(Serialize)]
struct PartyCheck {
    party: PartyId,
    segment: usize,
    mismatches: usize,
}

#[derive(Serialize)]
struct DryRun {
    pulses_per_segment: u64,
    seed: u64,
    segment_key_lengths: Vec<usize>,
    global_key_length: usize,
    announcements: usize,
    parties: Vec<PartyCheck>,
    all_parties_agree: bool,
}

#[derive(Serialize)]
struct PlanReport {
    plan: NetworkPlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    dry_run: Option<DryRun>,
}

fn dry_run(plan: &NetworkPlan, args: &PlanArgs) -> Result<DryRun, Failure> {
    // (segment key held by the center, key each member holds)
    let mut center_keys = Vec::new();
    let mut member_keys: Vec<Vec<(PartyId, KeyBits)>> = Vec::new();
    for (i, seg) in plan.segments.iter().enumerate() {
        let km = &seg.arm_distances_km;
        let (l1, l2) = (km[0], *km.last().expect("segment link"));
        let mu = plan.per_segment_rate[i].mu;
        let cfg = SessionConfig {
            y0: args.y0,
            dark_count_prob: args.dark,
            seed: args.seed.wrapping_add(i as u64),
            arm_lengths_km: [l1 / 2.0, l1 / 2.0, l2 / 2.0, l2 / 2.0],
            ..SessionConfig::symmetric(mu, 0.0, args.pulses)
        };
        let r = run_session(&cfg)?;
        let others: Vec<PartyId> = seg.members.iter().copied().filter(|&m| m != seg.center).collect();
        if seg.is_pair() {
            member_keys.push(vec![(seg.center, r.bob_ab.clone()), (others[0], r.alice_ab.clone())]);
            center_keys.push(r.bob_ab);
        } else {
            let k = r.agree();
            member_keys.push(vec![(others[0], k.alice), (seg.center, k.bob.clone()), (others[1], k.charlie)]);
            center_keys.push(k.bob);
        }
    }
    let rec = reconcile_network(&center_keys, plan)?;
    let mut parties = Vec::new();
    for &party in &plan.tree.vertices {
        let seg = plan.home_segment(party).expect("covered");
        let own = &member_keys[seg].iter().find(|(p, _)| *p == party).expect("member").1;
        let derived = derive_global_key(seg, own, &rec.announcements, plan)?;
        parties.push(PartyCheck { party, segment: seg, mismatches: derived.mismatches(&rec.global_key) });
    }
    Ok(DryRun {
        pulses_per_segment: args.pulses,
        seed: args.seed,
        segment_key_lengths: center_keys.iter().map(KeyBits::len).collect(),
        global_key_length: rec.global_key.len(),
        announcements: rec.announcements.len(),
        all_parties_agree: parties.iter().all(|p| p.mismatches == 0),
        parties,
    })
}

fn cmd_plan(args: PlanArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.graph)
        .map_err(|e| invalid(format!("cannot read {}: {e}", args.graph.display())))?;
    let graph: PartyGraph =
        serde_json::from_str(&text).map_err(|e| invalid(format!("invalid graph {}: {e}", args.graph.display())))?;
    check_finite("--ec-efficiency", args.ec_efficiency)?;
    for (name, p) in [("--y0", args.y0), ("--dark", args.dark)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("{name} must be in [0, 1], got {p}")));
        }
    }
    let policy = match &args.mu_grid {
        Some(grid) => MuPolicy::Optimize(grid.clone()),
        None => {
            if !(args.mu >= 0.0 && args.mu.is_finite()) {
                return Err(invalid(format!("--mu must be >= 0, got {}", args.mu)));
            }
            MuPolicy::Fixed(args.mu)
        }
    };
    let plan = plan_network(&graph, &policy, args.ec_efficiency)?;
    let dry = if args.pulses > 0 { Some(dry_run(&plan, &args)?) } else { None };
    let json = to_json(&PlanReport { plan, dry_run: dry }).map_err(io)?;
    emit(&json, args.out.as_deref()).map_err(io)
}

fn cmd_selftest() -> CmdResult {
    let reports = selftest::run_all();
    let mut failed = 0;
    for r in &reports {
        println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(invalid(format!("{failed} of {} checks failed", reports.len())))
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Discriminate(a) => cmd_discriminate(a),
        Command::Keyrate(a) => cmd_keyrate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Selftest => cmd_selftest(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
