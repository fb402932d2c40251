use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use flowmon::alias::{check_admissible, compute_alias, Admissibility};
use flowmon::ast::{Instr, Pos, StmtId};
use flowmon::frontend::{elaborate, parse, TypedProgram};
use flowmon::harness::{run_suite, CheckKind, GenConfig, Summary};
use flowmon::instrument::{emit, emit_c, instrument, DEFAULT_C_PREAMBLE};
use flowmon::interp::{exec, EvalContext, ExecError, ExecObserver, Mutation};
use flowmon::label::Label;
use flowmon::layout::{label_decls, LabelKind};
use flowmon::model::{BlockVal, Val};

#[derive(Parser)]
#[command(name = "flowmon", version, about = "Runtime information-flow monitor for a small C-like language")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a program under the label-tracking monitor
    Run {
        file: PathBuf,
        /// execution step budget
        #[arg(long, default_value_t = 1_000_000)]
        fuel: u64,
    },
    /// Rewrite a program so it tracks its own labels in status variables
    Transform {
        file: PathBuf,
        /// write the result here instead of standard output
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// wrap the result in a compilable C translation unit
        #[arg(long)]
        emit_c: bool,
        /// replace the built-in C prelude (implies --emit-c)
        #[arg(long)]
        c_preamble: Option<PathBuf>,
        /// print the shadow-label layout of each declaration and exit
        #[arg(long)]
        dump_layout: bool,
    },
    /// Print per-assignment may-write sets and validate them along a run
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        fuel: u64,
    },
    /// Differential random testing of the monitor and the transformer
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        count: u64,
        #[arg(long, value_enum, default_value_t = CheckArg::All)]
        check: CheckArg,
        /// deliberately broken monitor variant, to exercise the checks
        #[arg(long, value_enum)]
        mutate: Option<MutateArg>,
        /// directory for counterexample dumps
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    Soundness,
    Agreement,
    Lemma,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutateArg {
    DropPc,
    StrongArray,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { file, fuel } => cmd_run(&file, fuel),
        Cmd::Transform {
            file,
            out,
            emit_c,
            c_preamble,
            dump_layout,
        } => cmd_transform(&file, out.as_deref(), emit_c, c_preamble.as_deref(), dump_layout),
        Cmd::Check { file, fuel } => cmd_check(&file, fuel),
        Cmd::Fuzz {
            seed,
            count,
            check,
            mutate,
            out_dir,
        } => cmd_fuzz(seed, count, check, mutate, &out_dir),
    }
}

fn load(file: &Path) -> Result<TypedProgram, String> {
    let text = fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    parse(&text)
        .and_then(|src| elaborate(&src))
        .map_err(|e| format!("{}:{e}", file.display()))
}

struct RunObserver {
    asserts: Vec<(String, Label, Label, Pos)>,
    reports: Vec<(String, Pos)>,
}

impl ExecObserver for RunObserver {
    fn on_assert(&mut self, var: &str, expected: Label, actual: Label, pos: Pos) {
        self.asserts.push((var.to_string(), expected, actual, pos));
    }
    fn on_report(&mut self, message: &str, pos: Pos) {
        self.reports.push((message.to_string(), pos));
    }
}

fn fmt_blockval(v: &BlockVal, names: &dyn Fn(flowmon::model::Block) -> String) -> String {
    let one = |v: &Val| match v {
        Val::Ptr(loc) => match loc.offset {
            Some(i) => format!("&{}[{i}]", names(loc.block)),
            None => format!("&{}", names(loc.block)),
        },
        other => other.to_string(),
    };
    match v {
        BlockVal::Scalar(v) => one(v),
        BlockVal::Array(cells) => {
            let inner: Vec<String> = cells.iter().map(one).collect();
            format!("{{ {} }}", inner.join(", "))
        }
    }
}

fn cmd_run(file: &Path, fuel: u64) -> ExitCode {
    let p = match load(file) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let alias = compute_alias(&p);
    let ctx = EvalContext {
        env: &p.env,
        alias: &alias,
        mutation: None,
    };
    let mut m = p.initial_memory.clone();
    let mut g = p.initial_labels.clone();
    let mut fuel = fuel;
    let mut obs = RunObserver {
        asserts: Vec::new(),
        reports: Vec::new(),
    };
    if let Err(e) = exec(&ctx, &p.body, Label::BOTTOM, &mut m, &mut g, &mut fuel, &mut obs) {
        match e {
            ExecError::Timeout => eprintln!("error: {}: execution budget exhausted", file.display()),
            ExecError::Fault { kind, pos } => {
                eprintln!("error: {}:{pos}: runtime fault: {kind}", file.display())
            }
        }
        return ExitCode::from(3);
    }
    let names = |b| p.env.name_of(b).to_string();
    for x in p.env.names() {
        let b = p.env.block_of(x).unwrap();
        println!("{x} {} {}", fmt_blockval(m.get(b).unwrap(), &names), g.get(b));
    }
    let mut violated = false;
    for (var, expected, actual, pos) in &obs.asserts {
        if expected == actual {
            println!("{}:{pos}: assert security_status({var}) == {expected}: pass", file.display());
        } else {
            violated = true;
            println!(
                "{}:{pos}: assert security_status({var}) == {expected}: violation (actual {actual})",
                file.display()
            );
        }
    }
    for (msg, pos) in &obs.reports {
        violated = true;
        println!("{}:{pos}: report_violation: {msg}", file.display());
    }
    if violated {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_transform(
    file: &Path,
    out: Option<&Path>,
    want_c: bool,
    c_preamble: Option<&Path>,
    dump_layout: bool,
) -> ExitCode {
    let p = match load(file) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if dump_layout {
        for d in &p.decls {
            let decls = match label_decls(&d.name, &d.ty) {
                Ok(ds) => ds,
                Err(e) => {
                    eprintln!("error: {}: {e}", file.display());
                    return ExitCode::from(2);
                }
            };
            for ld in decls {
                let kind = match ld.kind {
                    LabelKind::Exact => "exact",
                    LabelKind::Summary => "summary",
                };
                println!(
                    "{} : {} (kind={kind}, depth={})",
                    ld.name,
                    ld.shape,
                    ld.depth
                );
            }
        }
        return ExitCode::SUCCESS;
    }
    let alias = compute_alias(&p);
    let q = match instrument(&p, &alias) {
        Ok(q) => q,
        Err(e) => {
            eprintln!("error: {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    let text = if want_c || c_preamble.is_some() {
        let preamble = match c_preamble {
            Some(path) => match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            },
            None => DEFAULT_C_PREAMBLE.to_string(),
        };
        emit_c(&q, &preamble)
    } else {
        emit(&q)
    };
    match out {
        Some(path) => {
            if let Err(e) = fs::write(path, text) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}

fn assignment_positions(body: &Instr, out: &mut Vec<(StmtId, Pos)>) {
    match body {
        Instr::Assign { id, pos, .. } => out.push((*id, *pos)),
        Instr::Seq(a, b) => {
            assignment_positions(a, out);
            assignment_positions(b, out);
        }
        Instr::If {
            then_branch,
            else_branch,
            ..
        } => {
            assignment_positions(then_branch, out);
            assignment_positions(else_branch, out);
        }
        Instr::While { body, .. } => assignment_positions(body, out),
        _ => {}
    }
}

fn cmd_check(file: &Path, fuel: u64) -> ExitCode {
    let p = match load(file) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let alias = compute_alias(&p);
    let mut assigns = Vec::new();
    assignment_positions(&p.body, &mut assigns);
    for (id, pos) in assigns {
        let vars: Vec<&str> = alias.targets(id).iter().map(|b| p.env.name_of(*b)).collect();
        println!("{}:{pos} -> {{{}}}", file.display(), vars.join(", "));
    }
    match check_admissible(&alias, &p, fuel) {
        Admissibility::Valid => {
            println!("admissible: yes");
            ExitCode::SUCCESS
        }
        Admissibility::Invalid { block, pos, .. } => {
            println!(
                "admissible: no (assignment at {}:{pos} wrote `{}` outside its set)",
                file.display(),
                p.env.name_of(block)
            );
            ExitCode::from(1)
        }
        Admissibility::Timeout => {
            println!("admissible: unknown (execution budget exhausted)");
            ExitCode::SUCCESS
        }
        Admissibility::Fault { kind, pos } => {
            eprintln!("error: {}:{pos}: runtime fault: {kind}", file.display());
            ExitCode::from(3)
        }
    }
}

fn dump_witness(dir: &Path, kind: &str, seed: u64, s: &Summary) {
    let Some(w) = &s.first_witness else { return };
    let mc = dir.join(format!("violation-{kind}-{seed}.mc"));
    let store = dir.join(format!("violation-{kind}-{seed}.store.txt"));
    if let Err(e) = fs::write(&mc, &w.program).and_then(|()| fs::write(&store, &w.detail)) {
        eprintln!("warning: could not write counterexample: {e}");
        return;
    }
    eprintln!("counterexample written to {} and {}", mc.display(), store.display());
}

fn cmd_fuzz(seed: u64, count: u64, check: CheckArg, mutate: Option<MutateArg>, out_dir: &Path) -> ExitCode {
    let cfg = GenConfig::default();
    let mutation = mutate.map(|m| match m {
        MutateArg::DropPc => Mutation::DropPcOnScalarAssign,
        MutateArg::StrongArray => Mutation::StrongArrayUpdate,
    });
    let kinds: &[(CheckKind, &str)] = match check {
        CheckArg::Soundness => &[(CheckKind::Soundness, "soundness")],
        CheckArg::Agreement => &[(CheckKind::Agreement, "agreement")],
        CheckArg::Lemma => &[(CheckKind::Lemma, "lemma")],
        CheckArg::All => &[
            (CheckKind::Soundness, "soundness"),
            (CheckKind::Agreement, "agreement"),
            (CheckKind::Lemma, "lemma"),
        ],
    };
    let mut total = Summary::default();
    for (kind, name) in kinds {
        let s = run_suite(*kind, &cfg, seed, count, mutation, false);
        eprintln!("{name}: {s}");
        dump_witness(out_dir, name, seed, &s);
        total.pass += s.pass;
        total.timeout += s.timeout;
        total.fault += s.fault;
        total.violation += s.violation;
    }
    println!("{total}");
    if total.violation > 0 {
        ExitCode::from(4)
    } else {
        ExitCode::SUCCESS
    }
}
