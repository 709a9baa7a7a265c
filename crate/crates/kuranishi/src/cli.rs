//! Command-line front end: `validate`, `pipeline` and `demo`.
//!
//! Exit codes: 0 success, 1 mathematical failure, 2 usage or parse error.

use crate::atlas::file::{parse_atlas, print_atlas};
use crate::atlas::quotient::{build_quotient, diagnose_hausdorff, diagnose_injectivity, fiber_structure};
use crate::atlas::{Atlas, CocycleLevel};
use crate::demos::{dyadic_radii, run_demo, source, DEMOS};
use crate::linalg::{q, Q};
use crate::perturbation::{compute_constants, construct_adapted, validate_adapted, Constants, Perturbation, Zones};
use crate::reduction::{atlas_reduce, describe, nest_reduction, reduce_footprints, validate_reduction, AtlasReduction};
use crate::report::{CheckReport, Report};
use crate::shrink::{erode_footprints, sampled_metric, shrink_to_footprints, tame_shrink};
use crate::zeroset::{independence_test, signed_count};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "kuranishi", version, about = "Validate Kuranishi atlases, run the perturbation pipeline, replay the failure demos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    All,
    Structure,
    Changes,
    Cocycle,
    Additivity,
    Tame,
    Injectivity,
    Hausdorff,
    Fibers,
    Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Shrink,
    Tame,
    Reduce,
    Perturb,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Weak,
    Standard,
    Strong,
}

impl From<Level> for CocycleLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::Weak => CocycleLevel::Weak,
            Level::Standard => CocycleLevel::Standard,
            Level::Strong => CocycleLevel::Strong,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the atlas validators.
    Validate {
        /// Atlas file, or the name of a shipped atlas.
        file: String,
        #[arg(long, value_enum, default_values_t = [Check::All])]
        check: Vec<Check>,
        #[arg(long, value_enum, default_value_t = Level::Standard)]
        level: Level,
        #[arg(long, default_value = "1/64", value_parser = parse_resolution)]
        resolution: Q,
        /// Write the report as CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run pipeline stages in order (default: tame reduce perturb count).
    Pipeline {
        file: String,
        #[arg(value_enum)]
        verbs: Vec<Verb>,
        #[arg(long, default_value = "1/64", value_parser = parse_resolution)]
        resolution: Q,
        /// Number of seeds, `0..n`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Compare signed counts over the seeds and two nested reductions.
        #[arg(long)]
        independence: bool,
        #[arg(long, value_enum, default_value_t = Level::Standard)]
        level: Level,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay one of the failure demonstrations.
    Demo {
        /// injectivity-fail, hausdorff-fail, linearity-fail or metrizability-fail.
        name: String,
        #[arg(long, default_value = "1/64", value_parser = parse_resolution)]
        resolution: Q,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_resolution(s: &str) -> Result<Q, String> {
    let h: Q = s.parse().map_err(|_| format!("`{s}` is not a rational number"))?;
    if h <= q(0, 1) {
        return Err("resolution must be positive".into());
    }
    Ok(h)
}

/// A failed run: exit code and message.
struct Fail(i32, String);

fn math(msg: impl Into<String>) -> Fail {
    Fail(1, msg.into())
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail(2, msg.into())
}

fn load(file: &str) -> Result<Atlas, Fail> {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => match source(file) {
            Some(s) => s.to_string(),
            None => return Err(usage(format!("{file}: {e}"))),
        },
    };
    parse_atlas(&text).map_err(|e| usage(format!("{file}: {e}")))
}

fn write_file(out: &Option<PathBuf>, name: &str, text: &str) -> Result<(), Fail> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        let p: PathBuf = Path::new(dir).join(name);
        std::fs::write(&p, text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

/// Parses `args` and runs the command; everything is printed to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(out, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let res = match cli.command {
        Command::Validate { file, check, level, resolution, out: dir } => validate(&file, &check, level.into(), &resolution, &dir, out),
        Command::Pipeline { file, verbs, resolution, seeds, independence, level, out: dir } => {
            pipeline(&file, &verbs, &resolution, seeds, independence, level.into(), &dir, out)
        }
        Command::Demo { name, resolution, out: dir } => demo(&name, &resolution, &dir, out),
    };
    match res {
        Ok(()) => 0,
        Err(Fail(code, msg)) => {
            let _ = writeln!(out, "error: {msg}");
            code
        }
    }
}

fn validate(file: &str, checks: &[Check], level: CocycleLevel, h: &Q, dir: &Option<PathBuf>, out: &mut dyn Write) -> Result<(), Fail> {
    let a = load(file)?;
    let has = |c: Check| checks.contains(&c) || (checks.contains(&Check::All) && !matches!(c, Check::Injectivity | Check::Hausdorff | Check::Fibers | Check::Metric));
    let mut rep = Report::default();
    if has(Check::Structure) {
        rep.add(a.validate_structure());
    }
    if has(Check::Changes) {
        for c in a.validate_changes(h).checks {
            rep.add(c);
        }
    }
    if has(Check::Cocycle) {
        rep.add(a.validate_cocycles(level, h));
    }
    if has(Check::Additivity) {
        rep.add(a.validate_additivity());
    }
    if has(Check::Tame) {
        rep.add(a.validate_tameness(h));
    }
    if has(Check::Injectivity) || has(Check::Hausdorff) || has(Check::Fibers) {
        let qs = build_quotient(&a, h);
        if has(Check::Injectivity) {
            rep.add(diagnose_injectivity(&a, &qs));
        }
        if has(Check::Hausdorff) {
            rep.add(diagnose_hausdorff(&a, &qs, &dyadic_radii()));
        }
        if has(Check::Fibers) {
            let mut c = CheckReport::pass("linear fibers");
            for n in 0..qs.node_count() {
                let f = fiber_structure(&a, &qs, n);
                if !f.linear {
                    c.fail_with(format!("non-linear fiber over {}", qs.fmt_node(n)), vec![]);
                    break;
                }
            }
            rep.add(c);
        }
    }
    if has(Check::Metric) {
        match sampled_metric(&a, h) {
            Ok(m) => rep.add(m.report),
            Err(e) => rep.add(CheckReport::new("sampled metric", crate::report::Status::Fail).detail(e.to_string())),
        }
    }
    let _ = write!(out, "{}", rep.text());
    write_file(dir, "validate.csv", &rep.csv())?;
    if rep.ok() {
        let _ = writeln!(out, "atlas {}: all checks pass", a.name);
        Ok(())
    } else {
        Err(math(format!("atlas {}: validation failed", a.name)))
    }
}

struct Stages {
    atlas: Atlas,
    h: Q,
    v: Option<AtlasReduction>,
    c: Option<AtlasReduction>,
    consts: Option<Constants>,
    perts: Vec<Perturbation>,
}

fn stage<T, E: std::fmt::Display>(name: &str, r: Result<T, E>) -> Result<T, Fail> {
    r.map_err(|e| math(format!("stage `{name}`: {e}")))
}

impl Stages {
    fn reductions(&mut self, verb: &str) -> Result<(AtlasReduction, AtlasReduction), Fail> {
        if self.v.is_none() {
            let v = AtlasReduction::named(&self.atlas, "V").or_else(|| AtlasReduction::named(&self.atlas, "core"));
            let v = v.filter(|v| validate_reduction(&self.atlas, v, &self.h).ok());
            let v = v.ok_or_else(|| math(format!("stage `{verb}`: no valid reduction; run `reduce` first")))?;
            let c = match AtlasReduction::named(&self.atlas, "C") {
                Some(c) => c,
                None => stage(verb, nest_reduction(&self.atlas, &v))?,
            };
            self.v = Some(v);
            self.c = Some(c);
        }
        Ok((self.v.clone().unwrap(), self.c.clone().unwrap()))
    }

    fn constants(&mut self, verb: &str) -> Result<Constants, Fail> {
        let tame = self.atlas.validate_tameness(&self.h);
        if !tame.ok() {
            return Err(math(format!("stage `{verb}`: atlas is not tame; run `tame` first\n{}", tame.text())));
        }
        if self.consts.is_none() {
            let (v, c) = self.reductions(verb)?;
            self.consts = Some(stage(verb, compute_constants(&self.atlas, &v, &c, &self.h))?);
        }
        Ok(self.consts.clone().unwrap())
    }
}

#[allow(clippy::too_many_arguments)]
fn pipeline(file: &str, verbs: &[Verb], h: &Q, seeds: u64, independence: bool, level: CocycleLevel, dir: &Option<PathBuf>, out: &mut dyn Write) -> Result<(), Fail> {
    let atlas = load(file)?;
    let verbs: Vec<Verb> = if verbs.is_empty() {
        let mut v = vec![Verb::Tame, Verb::Reduce, Verb::Perturb];
        if atlas.dim == 0 {
            v.push(Verb::Count);
        }
        v
    } else {
        verbs.to_vec()
    };
    if seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let mut st = Stages { atlas, h: h.clone(), v: None, c: None, consts: None, perts: vec![] };
    let mut transcript = String::new();
    let mut log = |out: &mut dyn Write, s: String| {
        let _ = writeln!(out, "{s}");
        transcript.push_str(&s);
        transcript.push('\n');
    };
    for verb in &verbs {
        match verb {
            Verb::Shrink => {
                let (fp, eps) = stage("shrink", erode_footprints(&st.atlas, &q(1, 8)))?;
                st.atlas = stage("shrink", shrink_to_footprints(&st.atlas, &fp))?;
                st.atlas.reductions.clear();
                log(out, format!("shrink: footprints eroded by {eps}"));
                write_file(dir, "shrunk.ka", &stage("shrink", print_atlas(&st.atlas))?)?;
            }
            Verb::Tame => {
                if st.atlas.validate_tameness(h).ok() {
                    log(out, "tame: atlas is already tame".into());
                } else {
                    let t = stage("tame", tame_shrink(&st.atlas, h))?;
                    for l in &t.transcript {
                        log(out, format!("tame: {l}"));
                    }
                    st.atlas = t.atlas;
                }
                let rep = st.atlas.validate(level, h);
                if !rep.ok() {
                    return Err(math(format!("stage `tame`: output fails validation\n{}", rep.text())));
                }
                write_file(dir, "tame.ka", &stage("tame", print_atlas(&st.atlas))?)?;
            }
            Verb::Reduce => {
                let v = match AtlasReduction::named(&st.atlas, "core") {
                    Some(v) if validate_reduction(&st.atlas, &v, h).ok() => v,
                    _ => {
                        let cr = stage("reduce", reduce_footprints(&st.atlas))?;
                        stage("reduce", atlas_reduce(&st.atlas, &cr))?
                    }
                };
                let rep = validate_reduction(&st.atlas, &v, h);
                if !rep.ok() {
                    return Err(math(format!("stage `reduce`: {}", rep.text())));
                }
                let c = stage("reduce", nest_reduction(&st.atlas, &v))?;
                log(out, format!("reduce: V\n{}reduce: C = nest(V)\n{}", describe(&v), describe(&c)));
                st.atlas.reductions.retain(|r| r.name != "V" && r.name != "C");
                st.atlas.reductions.push(v.to_spec("V"));
                st.atlas.reductions.push(c.to_spec("C"));
                st.v = Some(v);
                st.c = Some(c);
                st.consts = None;
                write_file(dir, "reduced.ka", &stage("reduce", print_atlas(&st.atlas))?)?;
            }
            Verb::Perturb => {
                let k = st.constants("perturb")?;
                let (v, c) = st.reductions("perturb")?;
                write_file(dir, "constants.txt", &k.text())?;
                log(out, format!("perturb: delta = {}, sigma = {:.6e}", k.delta, k.sigma));
                st.perts.clear();
                for seed in 0..seeds {
                    let nu = stage("perturb", construct_adapted(&st.atlas, &v, &c, &k, seed))?;
                    let rep = validate_adapted(&st.atlas, &v, &c, &k, &nu);
                    if !rep.ok() {
                        return Err(math(format!("stage `perturb`: seed {seed} is not adapted\n{}", rep.text())));
                    }
                    log(out, format!("perturb: seed {seed} adapted ({} checks pass)", rep.checks.len()));
                    let header = format!("kuranishi-perturbation v1\natlas {}\nresolution {}\nreduction V\nnested C\n", st.atlas.name, h);
                    write_file(dir, &format!("perturbation-{seed}.txt"), &format!("{header}{}", nu.text()))?;
                    st.perts.push(nu);
                }
            }
            Verb::Count => {
                if st.atlas.dim != 0 {
                    return Err(math(format!("stage `count`: virtual dimension {} is not 0", st.atlas.dim)));
                }
                let k = st.constants("count")?;
                let (v, c) = st.reductions("count")?;
                if st.perts.is_empty() {
                    let nu = Perturbation::zero(&st.atlas);
                    let rep = validate_adapted(&st.atlas, &v, &c, &k, &nu);
                    if !rep.ok() {
                        return Err(math(format!("stage `count`: the unperturbed section is not transverse; run `perturb` first\n{}", rep.text())));
                    }
                    st.perts.push(nu);
                }
                let z = Zones::new(&st.atlas, &v, &c, &k);
                for nu in &st.perts {
                    let n = stage("count", signed_count(&st.atlas, &z, nu))?;
                    log(out, format!("count: seed {} total {}", nu.seed, n.total));
                    write_file(dir, &format!("count-{}.txt", nu.seed), &n.text())?;
                }
            }
        }
    }
    if independence {
        let r = stage("independence", independence_test(&st.atlas, h, &(0..seeds).collect::<Vec<_>>()))?;
        for (pair, seed, n) in &r.totals {
            log(out, format!("independence: {pair} seed {seed} total {n}"));
        }
        if !r.agree {
            write_file(dir, "transcript.txt", &transcript)?;
            return Err(math("independence: signed totals differ"));
        }
        log(out, "independence: all totals equal".into());
    }
    write_file(dir, "transcript.txt", &transcript)?;
    Ok(())
}

fn demo(name: &str, h: &Q, dir: &Option<PathBuf>, out: &mut dyn Write) -> Result<(), Fail> {
    let key = name.trim_start_matches("circle-").trim_end_matches("-fail");
    if !DEMOS.contains(&key) {
        return Err(usage(format!("unknown demo `{name}` (known: {})", DEMOS.iter().map(|d| format!("{d}-fail")).collect::<Vec<_>>().join(", "))));
    }
    let o = run_demo(key, h).expect("known demo");
    let _ = write!(out, "{}", o.text());
    write_file(dir, &format!("demo-{key}.txt"), &o.report.text())?;
    if o.reproduced {
        Ok(())
    } else {
        Err(math(format!("demo {name}: expected outcome not reproduced")))
    }
}
