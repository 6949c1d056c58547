use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use nbdesign::designs::{classify, parse_design, sequence_profile, Design};
use nbdesign::estimation::monte_carlo_check;
use nbdesign::information::{info_total_exact, info_total_upper, EffectModel, InfoMatrix};
use nbdesign::matrixkit::RatMatrix;
use nbdesign::optimality::{
    cnbd2_efficiency, cnbd_efficiency, efficiency, kiefer_verdict, mean_pairwise_variance, phi_p, symmetric_design,
    table1, table2, table3, CompetingClass, Efficiency, OptimalityVerdict,
};
use nbdesign::rational::{format_decimal, format_fraction};
use nbdesign::sequences::{optimal_composition, Composition};
use nbdesign::{Error, Rational};

#[derive(Parser, Debug)]
#[command(name = "nbd", version, about = "Circular neighbor-balanced block designs: information, optimality, efficiency")]
struct Cli {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    M1,
    M2,
}

impl From<Model> for EffectModel {
    fn from(m: Model) -> Self {
        match m {
            Model::M1 => EffectModel::M1,
            Model::M2 => EffectModel::M2,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a design file (binary, CNBD, CNBD2, self neighbors)
    Verify { design: PathBuf },

    /// Information matrix for total effects, optimality verdicts and criteria
    Info {
        design: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::M1)]
        model: Model,
    },

    /// Efficiency of a design file, or of a CNBD (m1) / CNBD2 (m2) with block size k
    Eff {
        design: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Model::M1)]
        model: Model,
        #[arg(long, required_unless_present = "design", conflicts_with = "design")]
        k: Option<usize>,
    },

    /// Optimal block sequence composition for a continuous design
    Optseq {
        #[arg(long)]
        k: usize,
        /// Number of treatments available (defaults to k)
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, value_enum, default_value_t = Model::M1)]
        model: Model,
    },

    /// Build the symmetric design from an optimal sequence
    Optdesign {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: usize,
        /// Repeat the whole design this many times
        #[arg(long, default_value_t = 1)]
        b: usize,
        #[arg(long, value_enum, default_value_t = Model::M1)]
        model: Model,
    },

    /// Composition and efficiency tables
    Tables {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
    },

    /// Monte Carlo check of a contrast estimator's variance
    Simulate {
        design: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::M1)]
        model: Model,
        /// Contrast coefficients, e.g. "1,-1,0,0,0"
        #[arg(long, value_parser = parse_contrast, allow_hyphen_values = true)]
        contrast: Contrast,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Debug)]
struct Contrast(Vec<f64>);

fn parse_contrast(s: &str) -> Result<Contrast, String> {
    let values = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad coefficient {x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err("coefficients must be finite".into());
    }
    Ok(Contrast(values))
}

fn load(path: &PathBuf) -> anyhow::Result<Design> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_design(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Exact fraction in csv mode, four decimals otherwise.
fn show(x: &Rational, format: Format) -> String {
    match format {
        Format::Csv => format_fraction(x),
        Format::Text => format_decimal(x, 4),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn letters(seq: &[usize]) -> String {
    let cells: Vec<String> = seq
        .iter()
        .map(|&x| {
            if x <= 26 {
                char::from(b'a' + (x - 1) as u8).to_string()
            } else {
                x.to_string()
            }
        })
        .collect();
    format!("({})", cells.join(","))
}

fn matrix_text(m: &RatMatrix, format: Format) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let cells: Vec<String> = (0..m.cols()).map(|j| show(&m[(i, j)], format)).collect();
        match format {
            Format::Csv => out.push_str(&cells.join(",")),
            Format::Text => {
                let padded: Vec<String> = cells.iter().map(|c| format!("{c:>9}")).collect();
                out.push_str(&padded.join(" "));
            }
        }
        out.push('\n');
    }
    out
}

fn verify(path: &PathBuf, format: Format) -> anyhow::Result<String> {
    let d = load(path)?;
    let r = classify(&d);
    let ell = match &r.ell {
        Some(l) => format_fraction(l),
        None => "undefined".into(),
    };
    Ok(match format {
        Format::Csv => {
            let rows = [
                ("t", d.t().to_string()),
                ("b", d.b().to_string()),
                ("k", d.k().to_string()),
                ("binary", r.is_binary.to_string()),
                ("balanced_block", r.is_balanced_block.to_string()),
                ("cnbd", r.is_cnbd.to_string()),
                ("cnbd2", r.is_cnbd2.to_string()),
                ("no_self_neighbor_d1", r.no_self_neighbor_d1.to_string()),
                ("no_self_neighbor_d2", r.no_self_neighbor_d2.to_string()),
                ("ell", ell),
                ("ell_integral", r.ell_integral.to_string()),
            ];
            let mut out = String::from("property,value\n");
            for (k, v) in rows {
                out.push_str(&format!("{k},{v}\n"));
            }
            out
        }
        Format::Text => {
            let mut out = format!("design: t = {}, b = {}, k = {}\n{d}", d.t(), d.b(), d.k());
            out.push_str(&format!("binary: {}\n", yes_no(r.is_binary)));
            out.push_str(&format!("balanced block design: {}\n", yes_no(r.is_balanced_block)));
            out.push_str(&format!("CNBD: {}, ℓ = {ell}\n", yes_no(r.is_cnbd)));
            out.push_str(&format!("CNBD2: {}, ℓ = {ell}\n", yes_no(r.is_cnbd2)));
            out.push_str(&format!("no self neighbor at distance 1: {}\n", yes_no(r.no_self_neighbor_d1)));
            out.push_str(&format!("no self neighbor at distance 2: {}\n", yes_no(r.no_self_neighbor_d2)));
            out
        }
    })
}

fn verdict_line(v: &OptimalityVerdict, format: Format) -> String {
    let outcome = if v.conclusive {
        "universally optimal"
    } else if v.bound_based {
        "bound not attained (bound may not be attainable)"
    } else {
        "not established"
    };
    match format {
        Format::Csv => format!(
            "{},{},{},{},{}\n",
            v.class,
            v.completely_symmetric,
            show(&v.trace, format),
            show(&v.trace_bound, format),
            v.conclusive
        ),
        Format::Text => format!(
            "  {}: trace {} of bound {}, completely symmetric: {}; {outcome}\n",
            v.class,
            show(&v.trace, format),
            show(&v.trace_bound, format),
            yes_no(v.completely_symmetric)
        ),
    }
}

fn info(path: &PathBuf, model: EffectModel, format: Format) -> anyhow::Result<String> {
    let d = load(path)?;
    let exact = info_total_exact(&d, model)?;
    let upper: InfoMatrix = info_total_upper(&d, model, false).remove(0);
    let bound_attained = upper.matrix == exact.matrix;
    let mut verdicts = Vec::new();
    for class in [CompetingClass::NoSelfNeighbor, CompetingClass::Unrestricted] {
        match kiefer_verdict(&d, model, class) {
            Ok(v) => verdicts.push(v),
            Err(Error::ClassViolation(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let sym = exact.as_sym();
    let criteria: Vec<_> = [0.0, 1.0, f64::INFINITY]
        .iter()
        .map(|&p| phi_p(&sym, p))
        .collect::<Result<_, _>>()?;

    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(&matrix_text(&exact.matrix, format));
            out.push_str(&format!("trace,{}\n", show(&exact.trace(), format)));
            out.push_str(&format!("rank,{}\n", exact.rank()));
            out.push_str(&format!("upper_bound_attained,{bound_attained}\n"));
            for c in &criteria {
                out.push_str(&format!("phi_{},{}\n", c.p, c.value));
            }
            out.push_str("class,completely_symmetric,trace,trace_bound,conclusive\n");
            for v in &verdicts {
                out.push_str(&verdict_line(v, format));
            }
        }
        Format::Text => {
            out.push_str(&format!("total effects under {model}, t = {}, b = {}, k = {}\n", d.t(), d.b(), d.k()));
            out.push_str(&matrix_text(&exact.matrix, format));
            out.push_str(&format!("trace: {}\n", show(&exact.trace(), format)));
            out.push_str(&format!("rank: {}\n", exact.rank()));
            match exact.complete_symmetry() {
                Some((a, b)) => out.push_str(&format!(
                    "completely symmetric: a = {}, b = {}\n",
                    show(&a, format),
                    show(&b, format)
                )),
                None => out.push_str("completely symmetric: no\n"),
            }
            out.push_str(&format!("upper bound attained: {}\n", yes_no(bound_attained)));
            out.push_str(&format!("mean pairwise variance factor: {:.6}\n", mean_pairwise_variance(&exact)));
            for c in &criteria {
                let name = c.alias.map(|a| format!(" ({a})")).unwrap_or_default();
                out.push_str(&format!("Phi_{}{name}: {:.6}\n", c.p, c.value));
            }
            out.push_str("verdicts:\n");
            for v in &verdicts {
                out.push_str(&verdict_line(v, format));
            }
        }
    }
    Ok(out)
}

fn efficiency_report(e: &Efficiency, format: Format) -> String {
    match format {
        Format::Csv => {
            let approx = e.approximation.map(|a| a.to_string()).unwrap_or_default();
            format!("exact,rounded,approximation\n{},{},{approx}\n", format_fraction(&e.exact), e.rounded)
        }
        Format::Text => {
            let mut out = format!("efficiency: {} ({})\n", e.rounded, format_fraction(&e.exact));
            if let Some(a) = e.approximation {
                out.push_str(&format!("large-k approximation: {a:.4}\n"));
            }
            out
        }
    }
}

fn eff(design: Option<&PathBuf>, k: Option<usize>, model: EffectModel, format: Format) -> anyhow::Result<String> {
    let e = match (design, k) {
        (Some(path), _) => Efficiency { approximation: None, ..efficiency(&load(path)?, model)? },
        (None, Some(k)) => match model {
            EffectModel::M1 => cnbd_efficiency(k)?,
            EffectModel::M2 => cnbd2_efficiency(k)?,
        },
        (None, None) => bail!("either a design file or --k is required"),
    };
    Ok(efficiency_report(&e, format))
}

fn optseq(k: usize, t: Option<usize>, model: EffectModel, format: Format) -> anyhow::Result<String> {
    let comp = optimal_composition(k, t.unwrap_or(k), model)?;
    let mut out = String::new();
    match format {
        Format::Csv => {
            match model {
                EffectModel::M1 => out.push_str("k,v_star,v_minus,v_plus,n_minus,n_plus,value,representative\n"),
                EffectModel::M2 => out.push_str("k,v1,v2,value,representative\n"),
            }
            for c in &comp.choices {
                let rep = c.representative().iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
                let value = format_fraction(&comp.value);
                match c {
                    Composition::M1(x) => out.push_str(&format!(
                        "{k},{},{},{},{},{},{value},{rep}\n",
                        x.v_star, x.v_minus, x.v_plus, x.n_minus, x.n_plus
                    )),
                    Composition::M2(x) => out.push_str(&format!("{k},{},{},{value},{rep}\n", x.v1, x.v2)),
                }
            }
        }
        Format::Text => {
            out.push_str(&format!("k = {k} under {model}: best per-block value {}\n", show(&comp.value, format)));
            if model == EffectModel::M1 {
                out.push_str(&format!("bound k - sqrt(2k) = {:.4}\n", comp.sqrt_bound));
            }
            for c in &comp.choices {
                match c {
                    Composition::M1(x) => {
                        let groups: Vec<String> = [(x.v_minus, x.n_minus), (x.v_plus, x.n_plus)]
                            .iter()
                            .filter(|(v, _)| *v > 0)
                            .map(|(v, n)| format!("{v} treatment{} x{n}", if *v == 1 { "" } else { "s" }))
                            .collect();
                        out.push_str(&format!("v*={}: {}  {}\n", x.v_star, groups.join(", "), letters(&c.representative())));
                    }
                    Composition::M2(x) => out.push_str(&format!(
                        "v1={}, v2={}: runs {:?}  {}\n",
                        x.v1,
                        x.v2,
                        x.runs,
                        letters(&c.representative())
                    )),
                }
            }
        }
    }
    Ok(out)
}

fn optdesign(k: usize, t: usize, b: usize, model: EffectModel, format: Format) -> anyhow::Result<String> {
    if b == 0 {
        bail!("--b must be at least 1");
    }
    let base = symmetric_design(k, t, model)?;
    let layout: Vec<Vec<usize>> = base.blocks().iter().cycle().take(base.b() * b).cloned().collect();
    let d = Design::new(t, layout)?;
    let verdict = kiefer_verdict(&d, model, CompetingClass::Unrestricted)?;
    let profile = sequence_profile(&d);
    Ok(match format {
        Format::Csv => d.to_text(),
        Format::Text => {
            let mut out = format!("# {} blocks, one sequence class: {}\n", d.b(), yes_no(profile.is_point_mass()));
            out.push_str(&format!("# {}", verdict_line(&verdict, format).trim_start()));
            out.push_str(&d.to_text());
            out
        }
    })
}

fn tables(which: u8, format: Format) -> String {
    let mut out = String::new();
    let efficiencies = |rows: Vec<(usize, Efficiency)>, out: &mut String| match format {
        Format::Csv => {
            out.push_str("k,efficiency\n");
            for (k, e) in rows {
                out.push_str(&format!("{k},{}\n", e.rounded));
            }
        }
        Format::Text => {
            out.push_str(&format!("{:>4}  {:>10}  {}\n", "k", "efficiency", "exact"));
            for (k, e) in rows {
                out.push_str(&format!("{k:>4}  {:>10}  {}\n", e.rounded, format_fraction(&e.exact)));
            }
        }
    };
    match which {
        1 => {
            let rows = table1();
            match format {
                Format::Csv => out.push_str("k,v_star,v_minus,v_plus,n_minus,n_plus\n"),
                Format::Text => out.push_str("   k  v*  v-  v+  n-  n+\n"),
            }
            for (k, c) in rows {
                match format {
                    Format::Csv => out.push_str(&format!(
                        "{k},{},{},{},{},{}\n",
                        c.v_star, c.v_minus, c.v_plus, c.n_minus, c.n_plus
                    )),
                    Format::Text => out.push_str(&format!(
                        "{k:>4}{:>4}{:>4}{:>4}{:>4}{:>4}\n",
                        c.v_star, c.v_minus, c.v_plus, c.n_minus, c.n_plus
                    )),
                }
            }
        }
        2 => efficiencies(table2(), &mut out),
        _ => efficiencies(table3(), &mut out),
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    path: &PathBuf,
    model: EffectModel,
    h: &[f64],
    sigma: f64,
    replicates: usize,
    seed: u64,
    format: Format,
) -> anyhow::Result<String> {
    let d = load(path)?;
    let r = monte_carlo_check(&d, model, h, sigma, replicates, seed)?;
    Ok(match format {
        Format::Csv => format!(
            "replicates,mean_estimate,true_value,empirical_variance,theoretical_variance,ratio\n{},{},{},{},{},{}\n",
            r.replicates, r.mean_estimate, r.true_value, r.empirical_variance, r.theoretical_variance, r.ratio
        ),
        Format::Text => format!(
            "replicates: {}\nmean estimate: {:.6}\ntrue value: {:.6}\nempirical variance: {:.6}\ntheoretical variance: {:.6}\nratio: {:.4}\n",
            r.replicates, r.mean_estimate, r.true_value, r.empirical_variance, r.theoretical_variance, r.ratio
        ),
    })
}

fn run(cli: Cli) -> anyhow::Result<String> {
    let format = cli.format;
    match cli.command {
        Command::Verify { design } => verify(&design, format),
        Command::Info { design, model } => info(&design, model.into(), format),
        Command::Eff { design, model, k } => eff(design.as_ref(), k, model.into(), format),
        Command::Optseq { k, t, model } => optseq(k, t, model.into(), format),
        Command::Optdesign { k, t, b, model } => optdesign(k, t, b, model.into(), format),
        Command::Tables { which } => Ok(tables(which, format)),
        Command::Simulate { design, model, contrast, sigma, replicates, seed } => {
            simulate(&design, model.into(), &contrast.0, sigma, replicates, seed, format)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let parse_error = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Parse { .. })));
            ExitCode::from(if parse_error { 2 } else { 1 })
        }
    }
}
