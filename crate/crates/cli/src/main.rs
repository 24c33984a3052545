use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use mcmt_core::engine::{applicable, apply_two_level_at, run};
use mcmt_core::hierarchy::MultilevelHierarchy;
use mcmt_core::matcher::{proliferate_all, Stack};
use mcmt_core::mcmt::{
    parse_rule_module, print_module, validate_rule, RuleModule, ROOT_ARROW, ROOT_NODE,
};
use mcmt_core::Graph;

/// Multilevel model transformations.
#[derive(Debug, Parser)]
#[command(name = "mcmt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a hierarchy for typing and potency violations.
    Validate { hierarchy: PathBuf },
    /// Rule module commands.
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
    /// Turn rules into two-level rules for one target model.
    Proliferate {
        hierarchy: PathBuf,
        rules: PathBuf,
        /// Target model, by name or dotted path.
        #[arg(long)]
        target: String,
        /// Write the rule set here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Apply one rule once and print the resulting hierarchy.
    Apply {
        hierarchy: PathBuf,
        rules: PathBuf,
        #[arg(long)]
        target: String,
        /// A rule of the module or one of its proliferated rules.
        #[arg(long)]
        rule: String,
        /// Index into the applicable matches.
        #[arg(long = "match", default_value_t = 0)]
        index: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Apply randomly chosen rules until none applies or the step budget
    /// runs out.
    Run {
        hierarchy: PathBuf,
        rules: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the execution trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print a rule module in canonical form.
    Fmt { rules: PathBuf },
}

#[derive(Debug, Subcommand)]
enum RulesCommand {
    /// Parse and validate a rule module.
    Check {
        rules: PathBuf,
        /// Validate against the root of this hierarchy instead of the
        /// default one.
        #[arg(long)]
        hierarchy: Option<PathBuf>,
    },
}

const INVALID: u8 = 1;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_hierarchy(path: &Path) -> Result<MultilevelHierarchy> {
    MultilevelHierarchy::from_json(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_rules(path: &Path) -> Result<RuleModule> {
    let text = read(path)?;
    parse_rule_module(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn target_name(h: &MultilevelHierarchy, path: &str) -> Result<String> {
    Ok(h.find(path)?.name.clone())
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn default_root() -> Graph {
    Graph::build("root", [ROOT_NODE], [(ROOT_NODE, ROOT_ARROW, ROOT_NODE)]).expect("root graph")
}

fn validate(path: &Path) -> Result<ExitCode> {
    let h = load_hierarchy(path)?;
    let violations = h.validate();
    for v in &violations {
        println!("{v}");
    }
    if violations.is_empty() {
        println!(
            "{}: {} models, no violations",
            path.display(),
            h.models().len()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} violations", violations.len());
        Ok(ExitCode::from(INVALID))
    }
}

fn rules_check(path: &Path, hierarchy: Option<&Path>) -> Result<ExitCode> {
    let root = match hierarchy {
        Some(p) => load_hierarchy(p)?.root().graph.clone(),
        None => default_root(),
    };
    let text = read(path)?;
    let module = match parse_rule_module(&text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{}:{e}", path.display());
            return Ok(ExitCode::from(INVALID));
        }
    };
    let violations: Vec<_> = module
        .rules
        .iter()
        .flat_map(|r| validate_rule(r, &root))
        .collect();
    for v in &violations {
        eprintln!("{}: {v}", path.display());
    }
    if violations.is_empty() {
        println!(
            "{}: {} rules, no violations",
            path.display(),
            module.rules.len()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(INVALID))
    }
}

fn proliferate(
    hierarchy: &Path,
    rules: &Path,
    target: &str,
    output: Option<&Path>,
) -> Result<ExitCode> {
    let h = load_hierarchy(hierarchy)?;
    let module = load_rules(rules)?;
    let stack = Stack::from_hierarchy(&h, &target_name(&h, target)?)?;
    let p = proliferate_all(&module.rules, &stack);
    let json = serde_json::to_string_pretty(&p.to_json(&stack))?;
    let summary = format!(
        "{} MCMT rules -> {} two-level rules",
        module.rules.len(),
        p.rules.len()
    );
    match output {
        Some(_) => {
            emit(&json, output)?;
            println!("{summary}");
            for (name, count) in &p.breakdown {
                println!("  {name}: {count}");
            }
        }
        None => {
            emit(&json, None)?;
            eprintln!("{summary}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn apply(
    hierarchy: &Path,
    rules: &Path,
    target: &str,
    rule: &str,
    index: usize,
    output: Option<&Path>,
) -> Result<ExitCode> {
    let h = load_hierarchy(hierarchy)?;
    let module = load_rules(rules)?;
    let target = target_name(&h, target)?;
    let stack = Stack::from_hierarchy(&h, &target)?;
    let selected: Vec<_> = proliferate_all(&module.rules, &stack)
        .rules
        .into_iter()
        .filter(|r| r.name == rule || r.source_rule == rule)
        .collect();
    if selected.is_empty() {
        return Err(anyhow!("no rule named `{rule}` applies to `{target}`"));
    }
    let options = applicable(&selected, &stack);
    let Some((two_level, m)) = options.get(index) else {
        eprintln!(
            "`{rule}` has {} applicable matches, none at index {index}",
            options.len()
        );
        return Ok(ExitCode::from(INVALID));
    };
    let app = match apply_two_level_at(two_level, &h, &stack, m) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}: {e}", two_level.name);
            return Ok(ExitCode::from(INVALID));
        }
    };
    info!(
        "{}: created {:?}, deleted {:?}",
        two_level.name, app.created, app.deleted
    );
    emit(&app.hierarchy.to_json(), output)?;
    Ok(ExitCode::SUCCESS)
}

fn run_rules(
    hierarchy: &Path,
    rules: &Path,
    target: &str,
    steps: usize,
    seed: u64,
    trace: Option<&Path>,
    output: Option<&Path>,
) -> Result<ExitCode> {
    let h = load_hierarchy(hierarchy)?;
    let module = load_rules(rules)?;
    let target = target_name(&h, target)?;
    let exec = match run(&module.rules, &h, &target, steps, seed) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(INVALID));
        }
    };
    if let Some(p) = trace {
        fs::write(p, exec.trace_jsonl())
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    eprintln!("{} steps", exec.trace.len());
    emit(&exec.hierarchy.to_json(), output)?;
    Ok(ExitCode::SUCCESS)
}

fn fmt_rules(path: &Path) -> Result<ExitCode> {
    print!("{}", print_module(&load_rules(path)?));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MLM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { hierarchy } => validate(hierarchy),
        Command::Rules {
            command: RulesCommand::Check { rules, hierarchy },
        } => rules_check(rules, hierarchy.as_deref()),
        Command::Proliferate {
            hierarchy,
            rules,
            target,
            output,
        } => proliferate(hierarchy, rules, target, output.as_deref()),
        Command::Apply {
            hierarchy,
            rules,
            target,
            rule,
            index,
            output,
        } => apply(hierarchy, rules, target, rule, *index, output.as_deref()),
        Command::Run {
            hierarchy,
            rules,
            target,
            steps,
            seed,
            trace,
            output,
        } => run_rules(
            hierarchy,
            rules,
            target,
            *steps,
            *seed,
            trace.as_deref(),
            output.as_deref(),
        ),
        Command::Fmt { rules } => fmt_rules(rules),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
