//! `carleman` command-line front end.
//!
//! Data goes to files under `--out` and a JSON summary to standard output.
//! Diagnostics are one line on standard error, `error[<kind>]: <message>`.
//! Exit codes: 0 success, 1 numerical or model error, 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use carleman::carleman_dae::{build_dae_system, CarlemanDaeSystem};
use carleman::fixtures::{fixture_text, load_fixture, FIXTURE_NAMES};
use carleman::io::{
    complex_json, format_num, matrix_csv, matrix_json, num, trajectory_csv, trajectory_from_csv,
};
use carleman::sim::{compare, simulate_dae, simulate_linear, Comparison, Trajectory};
use carleman::spectral::{
    combination_spectrum, eigenvalues, match_spectra, mode_report, SpectrumReport,
};
use carleman::{
    build_extended_ode, coefficient_matrices, det_product_check, find_equilibrium, kron_reduce,
    parse_model, validate_against_ode, Coefficients, Complex64, Equilibrium64, Error, Matrix,
    ModelSpec,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

#[derive(Parser, Debug)]
#[command(name = "carleman", version, about = "Carleman linearization of DAE models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the model, find the equilibrium and check det(H_1_4) != 0.
    Check(Common),
    /// Write the first-row Taylor blocks G_1_j and H_1_j.
    Coeffs(Common),
    /// Carleman extension of an ODE model (no algebraic variables).
    BuildOde(Common),
    /// Square extended DAE system F11, F12, F21, F22.
    BuildDae(Common),
    /// Kron reduction to the lifted ODE and the H-tilde blocks.
    Reduce(Common),
    /// Nonlinear DAE run and lifted linear runs for orders 1..=order.
    Simulate(SimArgs),
    /// Linear modes; with --compare, lifted spectrum vs eigenvalue combinations.
    Spectrum(SpectrumArgs),
    /// Per-state RMS and max-abs errors between two trajectory CSV files.
    Compare(CompareArgs),
    /// Reduced-vs-reference relative error and determinant identities.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    /// Bundled model: test1, test1-ode, test2, test2-ode, test3.
    #[arg(long)]
    fixture: Option<String>,
    /// Path to a JSON model document.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[command(flatten)]
    source: Source,
    /// Truncation order, 1 to 3.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
    order: u8,
    /// Output directory for data files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Duration in seconds.
    #[arg(long = "T", default_value_t = 10.0)]
    t_end: f64,
    /// Step in seconds.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Initial perturbation from the equilibrium, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    /// Also match eig(condensed F-tilde_11) against eigenvalue combinations.
    #[arg(long)]
    compare: bool,
    /// Matching tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Debug)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Reference ODE model: fixture name or path. Defaults to `<fixture>-ode`
    /// when such a fixture exists.
    #[arg(long)]
    reference: Option<String>,
}

enum Failure {
    Usage(String),
    Model(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<Value, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            return match e.kind() {
                DisplayHelp | DisplayVersion => {
                    print!("{e}");
                    0
                }
                DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprintln!("error[usage]: a subcommand is required (see --help)");
                    2
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg
                        .lines()
                        .find(|l| !l.trim().is_empty())
                        .unwrap_or("invalid arguments")
                        .trim_start_matches("error: ");
                    eprintln!("error[usage]: {first}");
                    2
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            let mut out = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&summary).expect("serializable summary");
            if writeln!(out, "{text}").is_err() {
                return 1;
            }
            0
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error[usage]: {m}");
            2
        }
        Err(Failure::Model(e)) => {
            eprintln!("error[{}]: {}", e.kind(), one_line(&e.to_string()));
            1
        }
        Err(Failure::Io(m)) => {
            eprintln!("error[io]: {}", one_line(&m));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Check(c) => check(&c),
        Command::Coeffs(c) => coeffs(&c),
        Command::BuildOde(c) => build_ode(&c),
        Command::BuildDae(c) => build_dae(&c),
        Command::Reduce(c) => reduce(&c),
        Command::Simulate(a) => simulate(&a),
        Command::Spectrum(a) => spectrum(&a),
        Command::Compare(a) => compare_files(&a),
        Command::Validate(a) => validate(&a),
    }
}

fn load_source(src: &Source) -> Result<ModelSpec, Failure> {
    match (&src.fixture, &src.model) {
        (Some(name), None) => {
            if fixture_text(name).is_none() {
                return Err(Failure::Usage(format!(
                    "unknown fixture `{name}` (expected one of {})",
                    FIXTURE_NAMES.join(", ")
                )));
            }
            Ok(load_fixture(name)?)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            Ok(parse_model(&text)?)
        }
        _ => Err(Failure::Usage("exactly one of --fixture or --model is required".into())),
    }
}

struct Prepared {
    model: ModelSpec,
    eq: Equilibrium64,
    coeffs: Coefficients,
}

fn prepare(src: &Source) -> Result<Prepared, Failure> {
    let model = load_source(src)?;
    let eq = find_equilibrium::<f64>(&model)?;
    let coeffs = coefficient_matrices(&model, &eq)?;
    Ok(Prepared { model, eq, coeffs })
}

fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

fn labels(v: Vec<String>) -> Value {
    Value::Array(v.into_iter().map(Value::String).collect())
}

/// Writes `name.csv` or `name.json` under the output directory and returns
/// the file name.
struct Sink<'a> {
    dir: &'a Path,
    format: Format,
    written: Vec<String>,
}

impl<'a> Sink<'a> {
    fn new(c: &'a Common) -> Result<Self, Failure> {
        fs::create_dir_all(&c.out)
            .map_err(|e| Failure::Io(format!("{}: {e}", c.out.display())))?;
        Ok(Self {
            dir: &c.out,
            format: c.format,
            written: Vec::new(),
        })
    }

    fn write_text(&mut self, file: String, text: &str) -> Result<(), Failure> {
        let path = self.dir.join(&file);
        fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        self.written.push(file);
        Ok(())
    }

    fn matrix(&mut self, name: &str, a: &Matrix) -> Result<(), Failure> {
        match self.format {
            Format::Csv => self.write_text(format!("{name}.csv"), &matrix_csv(a, None)),
            Format::Json => {
                let text = serde_json::to_string_pretty(&json!({
                    "name": name,
                    "rows": a.rows(),
                    "cols": a.cols(),
                    "data": matrix_json(a),
                }))
                .expect("serializable");
                self.write_text(format!("{name}.json"), &(text + "\n"))
            }
        }
    }

    fn trajectory(&mut self, name: &str, tr: &Trajectory<f64>) -> Result<(), Failure> {
        match self.format {
            Format::Csv => self.write_text(format!("{name}.csv"), &trajectory_csv(tr)),
            Format::Json => {
                let rows: Vec<Value> = (0..tr.len())
                    .map(|k| {
                        json!({
                            "t": num(tr.times[k]),
                            "x": nums(tr.states.row(k)),
                            "z": nums(tr.algebraics.row(k)),
                        })
                    })
                    .collect();
                let text = serde_json::to_string_pretty(&json!({
                    "model": tr.meta.model,
                    "method": tr.meta.method,
                    "order": tr.meta.order,
                    "samples": rows,
                }))
                .expect("serializable");
                self.write_text(format!("{name}.json"), &(text + "\n"))
            }
        }
    }

    fn files(&self) -> Value {
        labels(self.written.clone())
    }
}

fn model_header(p: &Prepared) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("model".into(), json!(p.model.name));
    m.insert("n".into(), json!(p.model.n()));
    m.insert("m".into(), json!(p.model.m()));
    m.insert("x_sep".into(), nums(&p.eq.x_sep));
    m.insert("z_sep".into(), nums(&p.eq.z_sep));
    m
}

fn check(c: &Common) -> Outcome {
    let model = load_source(&c.source)?;
    let eq = find_equilibrium::<f64>(&model)?;
    let coeffs = coefficient_matrices(&model, &eq)?;
    let p = Prepared { model, eq, coeffs };
    let mut m = model_header(&p);
    m.insert("residual".into(), num(p.eq.residual_norm));
    m.insert("newton_iterations".into(), json!(p.eq.newton_iters));
    m.insert("det_h14".into(), num(p.coeffs.det_h14));
    m.insert("regular".into(), json!(true));
    m.insert("warnings".into(), labels(p.coeffs.warnings.clone()));
    if let Some(comment) = &p.model.comment {
        m.insert("comment".into(), json!(comment));
    }
    Ok(Value::Object(m))
}

fn coeffs(c: &Common) -> Outcome {
    let p = prepare(&c.source)?;
    let mut sink = Sink::new(c)?;
    for j in 1..=9 {
        sink.matrix(&format!("G_1_{j}"), p.coeffs.g(j))?;
        if p.model.m() > 0 {
            sink.matrix(&format!("H_1_{j}"), p.coeffs.h(j))?;
        }
    }
    let mut m = model_header(&p);
    let cols: Vec<Value> = (1..=9)
        .map(|j| labels(basis_labels(&p.coeffs.column_basis(j))))
        .collect();
    m.insert("column_labels".into(), Value::Array(cols));
    m.insert("det_h14".into(), num(p.coeffs.det_h14));
    m.insert("files".into(), sink.files());
    Ok(Value::Object(m))
}

fn basis_labels(b: &carleman::MonomialBasis) -> Vec<String> {
    (0..b.len()).map(|i| b.label(i)).collect()
}

fn order_of(c: &Common) -> usize {
    usize::from(c.order)
}

fn build_ode(c: &Common) -> Outcome {
    let p = prepare(&c.source)?;
    if p.model.m() > 0 {
        return Err(Failure::Model(Error::InvalidModel(format!(
            "`{}` has algebraic variables; use build-dae or reduce",
            p.model.name
        ))));
    }
    let g = &p.coeffs;
    let sys = build_extended_ode(&[g.g(1).clone(), g.g(2).clone(), g.g(3).clone()], order_of(c))?;
    let mut sink = Sink::new(c)?;
    sink.matrix("A_nord", &sys.a_nord)?;
    let mut m = model_header(&p);
    m.insert("order".into(), json!(sys.order));
    m.insert("basis".into(), labels(basis_labels(&sys.basis)));
    m.insert("files".into(), sink.files());
    Ok(Value::Object(m))
}

fn dae_system(p: &Prepared, order: usize) -> Result<CarlemanDaeSystem<f64>, Failure> {
    Ok(build_dae_system(&p.coeffs, order)?)
}

fn build_dae(c: &Common) -> Outcome {
    let p = prepare(&c.source)?;
    let sys = dae_system(&p, order_of(c))?;
    let mut sink = Sink::new(c)?;
    sink.matrix("F11", &sys.f11)?;
    sink.matrix("F12", &sys.f12)?;
    sink.matrix("F21", &sys.f21)?;
    sink.matrix("F22", &sys.f22)?;
    sink.matrix("F", &sys.full_matrix())?;
    let mut m = model_header(&p);
    m.insert("order".into(), json!(sys.order));
    m.insert("x_basis".into(), labels(basis_labels(&sys.x_basis)));
    m.insert("z_basis".into(), labels(basis_labels(&sys.z_basis)));
    m.insert("constraint_rows".into(), labels(sys.h_row_labels.clone()));
    m.insert("det_h14".into(), num(sys.det_h14));
    m.insert("files".into(), sink.files());
    Ok(Value::Object(m))
}

fn reduce(c: &Common) -> Outcome {
    let p = prepare(&c.source)?;
    let red = kron_reduce(&dae_system(&p, order_of(c))?)?;
    let mut sink = Sink::new(c)?;
    sink.matrix("Ftilde11", &red.ftilde11)?;
    sink.matrix("Ftilde11_condensed", &red.condensed.matrix)?;
    for (j, h) in red.htilde.iter().enumerate() {
        sink.matrix(&format!("Htilde_1_{}", j + 1), h)?;
    }
    let mut m = model_header(&p);
    m.insert("order".into(), json!(red.order));
    m.insert("basis".into(), labels(basis_labels(&red.basis)));
    m.insert("condensed_basis".into(), labels(red.condensed.col_labels()));
    m.insert("det_h14".into(), num(red.det_h14));
    m.insert("det_f22".into(), num(red.det_f22));
    m.insert("cond_f22".into(), num(red.cond_f22));
    m.insert("files".into(), sink.files());
    Ok(Value::Object(m))
}

fn comparison_json(c: &Comparison<f64>) -> Value {
    json!({ "rms": nums(&c.rms), "max_abs": nums(&c.max_abs) })
}

fn simulate(a: &SimArgs) -> Outcome {
    let c = &a.common;
    if !(a.dt > 0.0) || !a.dt.is_finite() {
        return Err(Failure::Usage(format!("--dt must be positive, got {}", a.dt)));
    }
    if !(a.t_end > 0.0) || !a.t_end.is_finite() {
        return Err(Failure::Usage(format!("--T must be positive, got {}", a.t_end)));
    }
    let p = prepare(&c.source)?;
    let n = p.model.n();
    let dx0 = a.x0.clone().unwrap_or_else(|| vec![-0.05; n]);
    if dx0.len() != n {
        return Err(Failure::Usage(format!(
            "--x0 has {} entries, model has {n} states",
            dx0.len()
        )));
    }
    let x0: Vec<f64> = p.eq.x_sep.iter().zip(&dx0).map(|(s, d)| s + d).collect();
    let truth = simulate_dae(&p.model, &x0, a.t_end, a.dt, &p.eq.z_sep)?;
    let mut sink = Sink::new(c)?;
    sink.trajectory("dae", &truth)?;
    let mut errors = Map::new();
    for order in 1..=order_of(c) {
        let f = if p.model.m() > 0 {
            kron_reduce(&dae_system(&p, order)?)?.ftilde11
        } else {
            let g = &p.coeffs;
            build_extended_ode(&[g.g(1).clone(), g.g(2).clone(), g.g(3).clone()], order)?.a_nord
        };
        let mut lin = simulate_linear(&f, &dx0, n, order, a.t_end, a.dt, &p.eq.x_sep)?;
        lin.meta.model = p.model.name.clone();
        sink.trajectory(&format!("lifted_order{order}"), &lin)?;
        errors.insert(format!("order{order}"), comparison_json(&compare(&lin, &truth)?));
    }
    let mut m = model_header(&p);
    m.insert("x0".into(), nums(&x0));
    m.insert("T".into(), num(a.t_end));
    m.insert("dt".into(), num(a.dt));
    m.insert("samples".into(), json!(truth.len()));
    m.insert(
        "max_constraint_residual".into(),
        num(truth.max_constraint_residual.unwrap_or(0.0)),
    );
    m.insert("errors_vs_dae".into(), Value::Object(errors));
    m.insert("files".into(), sink.files());
    Ok(Value::Object(m))
}

fn report_json(r: &SpectrumReport<f64>) -> Value {
    let modes: Vec<Value> = r
        .modes
        .iter()
        .map(|m| {
            json!({
                "re": num(m.eigenvalue.re),
                "im": num(m.eigenvalue.im),
                "frequency_hz": m.frequency_hz.map_or(Value::Null, num),
                "damping": num(m.damping),
            })
        })
        .collect();
    json!({ "source": r.source, "modes": modes })
}

fn spectrum(a: &SpectrumArgs) -> Outcome {
    let c = &a.common;
    let p = prepare(&c.source)?;
    let base = eigenvalues(&p.coeffs.linear_state_matrix()?)?;
    let mut m = model_header(&p);
    m.insert("linear".into(), report_json(&mode_report(&base, "A_1_1")));
    let mut sink = Sink::new(c)?;
    let mut points: Vec<(&str, Complex64)> = base.iter().map(|&l| ("linear", l)).collect();
    if a.compare {
        let order = order_of(c);
        let lifted_matrix = if p.model.m() > 0 {
            kron_reduce(&dae_system(&p, order)?)?.condensed.matrix
        } else {
            let g = &p.coeffs;
            let sys =
                build_extended_ode(&[g.g(1).clone(), g.g(2).clone(), g.g(3).clone()], order)?;
            carleman::condense(&sys.a_nord, &sys.basis, &sys.basis)?.matrix
        };
        let lifted = eigenvalues(&lifted_matrix)?;
        let combos = combination_spectrum(&base, order);
        let r = match_spectra(&lifted, &combos, a.tol)?;
        let pairs: Vec<Value> = r
            .pairs
            .iter()
            .map(|&(i, j, d)| {
                json!({ "lifted": complex_json(lifted[i]), "combination": complex_json(combos[j]), "distance": num(d) })
            })
            .collect();
        m.insert(
            "compare".into(),
            json!({
                "order": order,
                "tol": num(a.tol),
                "max_distance": num(r.max_distance),
                "passed": r.passed,
                "pairs": pairs,
            }),
        );
        points.extend(lifted.iter().map(|&l| ("lifted", l)));
        points.extend(combos.iter().map(|&l| ("combination", l)));
    }
    if c.format == Format::Csv {
        let mut text = String::from("set,re,im\n");
        for (set, l) in &points {
            text.push_str(&format!("{set},{},{}\n", format_num(l.re), format_num(l.im)));
        }
        sink.write_text("spectrum_points.csv".into(), &text)?;
    }
    m.insert("files".into(), sink.files());
    Ok(Value::Object(m))
}

fn read_trajectory(path: &Path) -> Result<Trajectory<f64>, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(trajectory_from_csv(&text)?)
}

fn compare_files(a: &CompareArgs) -> Outcome {
    let ta = read_trajectory(&a.a)?;
    let tb = read_trajectory(&a.b)?;
    let c = compare(&ta, &tb)?;
    Ok(json!({
        "a": a.a.display().to_string(),
        "b": a.b.display().to_string(),
        "samples": ta.len(),
        "rms": nums(&c.rms),
        "max_abs": nums(&c.max_abs),
    }))
}

fn validate(a: &ValidateArgs) -> Outcome {
    let c = &a.common;
    let p = prepare(&c.source)?;
    let order = order_of(c);
    let sys = dae_system(&p, order)?;
    let det = det_product_check(&sys)?;
    let red = kron_reduce(&sys)?;
    let reference = match (&a.reference, &c.source.fixture) {
        (Some(r), _) => Some(if fixture_text(r).is_some() {
            load_fixture(r)?
        } else {
            let text = fs::read_to_string(r).map_err(|e| Failure::Io(format!("{r}: {e}")))?;
            parse_model(&text)?
        }),
        (None, Some(f)) => {
            let name = format!("{f}-ode");
            if fixture_text(&name).is_some() {
                Some(load_fixture(&name)?)
            } else {
                None
            }
        }
        (None, None) => None,
    };
    let mut m = model_header(&p);
    m.insert("order".into(), json!(order));
    match reference {
        Some(r) => {
            let eq = find_equilibrium::<f64>(&r)?;
            let rc = coefficient_matrices(&r, &eq)?;
            let ode = build_extended_ode(&[rc.g(1).clone(), rc.g(2).clone(), rc.g(3).clone()], order)?;
            let pct = validate_against_ode(&red, &ode)?;
            m.insert("reference".into(), json!(r.name));
            m.insert("error_percent".into(), num(pct));
        }
        None => {
            m.insert("reference".into(), Value::Null);
            m.insert("error_percent".into(), Value::Null);
        }
    }
    let ids: Vec<Value> = det
        .identities
        .iter()
        .map(|i| {
            json!({
                "block": i.block,
                "formula": i.formula,
                "direct": num(i.direct),
                "power_form": num(i.power_form),
                "permutation_sign": i.parity,
                "rel_err_signed": num(i.rel_err_signed),
                "rel_err_magnitude": num(i.rel_err_magnitude),
            })
        })
        .collect();
    m.insert(
        "determinant".into(),
        json!({
            "det_h14": num(det.det_h14),
            "det_f22": num(det.det_f22),
            "block_product": num(det.block_product),
            "signed_power_product": num(det.signed_power_product),
            "power_product": num(det.power_product),
            "rel_err_blocks": num(det.rel_err_blocks),
            "rel_err_signed": num(det.rel_err_signed),
            "rel_err_magnitude": num(det.rel_err_magnitude),
            "identities": ids,
        }),
    );
    Ok(Value::Object(m))
}
