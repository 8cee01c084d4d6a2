//! `qwalk` command-line interface.
//!
//! ```text
//! qwalk synth --out data --seed 1
//! qwalk embed --graph data/graph.txt --labels data/labels.txt --out run --seed 1
//! qwalk sweep --graph data/graph.txt --labels data/labels.txt --param gamma --values 0,0.5,0.9 --seeds 1,2 --out sweep
//! qwalk eval --embeddings run/embeddings.txt --labels data/labels.txt --seed 1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use qwalk::config::PARAMETERS;
use qwalk::eval::cross_validate;
use qwalk::graph::NodeIndex;
use qwalk::labels::parse_labels_with;
use qwalk::pipeline::{run_pipeline, sweep, Dataset, RunOptions, SWEEP_POLICIES};
use qwalk::sgns::read_embeddings;
use qwalk::synth::{labels_to_text, synth_graph};
use qwalk::ExperimentConfig;

fn config_args(cmd: Command) -> Command {
    let cmd = cmd
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("key = value config file; unspecified keys take their defaults"),
        )
        .arg(
            Arg::new("graph")
                .long("graph")
                .value_name("FILE")
                .help("edge list (alias for --graph_path)"),
        )
        .arg(
            Arg::new("labels")
                .long("labels")
                .value_name("FILE")
                .help("label file (alias for --labels_path)"),
        )
        .arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("override any config key"),
        );
    PARAMETERS.iter().fold(cmd, |cmd, &key| {
        cmd.arg(Arg::new(key).long(key).value_name("VALUE").hide_short_help(true))
    })
}

fn resolve_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let mut config = match m.get_one::<PathBuf>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let mut overrides = Vec::new();
    if let Some(g) = m.get_one::<String>("graph") {
        overrides.push(format!("graph_path={g}"));
    }
    if let Some(l) = m.get_one::<String>("labels") {
        overrides.push(format!("labels_path={l}"));
    }
    for &key in PARAMETERS {
        if let Some(v) = m.get_one::<String>(key) {
            overrides.push(format!("{key}={v}"));
        }
    }
    if let Some(sets) = m.get_many::<String>("set") {
        overrides.extend(sets.cloned());
    }
    config.apply_overrides(overrides.iter().map(String::as_str))?;
    Ok(config)
}

fn require_seed(m: &ArgMatches) -> Result<()> {
    if m.get_one::<String>("seed").is_none() {
        bail!("--seed is required for reproducible runs");
    }
    Ok(())
}

fn out_arg(required: bool) -> Arg {
    Arg::new("out")
        .long("out")
        .value_name("DIR")
        .required(required)
        .value_parser(value_parser!(PathBuf))
}

fn cli() -> Command {
    Command::new("qwalk")
        .about("Label-confidence guided Q-walk node embeddings")
        .version(clap::crate_version!())
        .subcommand_required(true)
        .subcommand(config_args(
            Command::new("embed")
                .about("Run the full pipeline and write a run directory")
                .arg(out_arg(true)),
        ))
        .subcommand(
            Command::new("synth")
                .about("Write a planted-partition graph and its labels")
                .arg(out_arg(true))
                .arg(Arg::new("communities").long("communities").default_value("2").value_parser(value_parser!(usize)))
                .arg(Arg::new("per_community").long("per_community").default_value("100").value_parser(value_parser!(usize)))
                .arg(Arg::new("p_in").long("p_in").default_value("0.1").value_parser(value_parser!(f64)))
                .arg(Arg::new("p_out").long("p_out").default_value("0.01").value_parser(value_parser!(f64)))
                .arg(Arg::new("seed").long("seed").required(true).value_parser(value_parser!(u64))),
        )
        .subcommand(config_args(
            Command::new("sweep")
                .about("Vary one parameter over seeds for the Q-walk and biased policies")
                .arg(out_arg(true))
                .arg(Arg::new("param").long("param").required(true))
                .arg(Arg::new("values").long("values").required(true).value_delimiter(','))
                .arg(
                    Arg::new("seeds")
                        .long("seeds")
                        .required(true)
                        .value_delimiter(',')
                        .value_parser(value_parser!(u64)),
                ),
        ))
        .subcommand(
            Command::new("eval")
                .about("Cross-validate k-NN on a precomputed embedding file")
                .arg(Arg::new("embeddings").long("embeddings").required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("labels").long("labels").required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("k_nn").long("k_nn").default_value("3").value_parser(value_parser!(usize)))
                .arg(Arg::new("folds").long("folds").default_value("5").value_parser(value_parser!(usize)))
                .arg(Arg::new("seed").long("seed").required(true).value_parser(value_parser!(u64)))
                .arg(out_arg(false)),
        )
}

fn embed(m: &ArgMatches) -> Result<()> {
    require_seed(m)?;
    let config = resolve_config(m)?;
    let data = Dataset::from_config(&config)?;
    let out = m.get_one::<PathBuf>("out").expect("required").clone();
    let run = run_pipeline(
        &config,
        &data,
        &RunOptions {
            out_dir: Some(out.clone()),
            deadline: None,
        },
    )?;
    println!(
        "{} macro-F1 {:.4} micro-F1 {:.4} -> {}",
        run.policy,
        run.report.macro_f1,
        run.report.micro_f1,
        out.display()
    );
    Ok(())
}

fn synth(m: &ArgMatches) -> Result<()> {
    let (graph, labels) = synth_graph(
        *m.get_one("communities").expect("default"),
        *m.get_one("per_community").expect("default"),
        *m.get_one("p_in").expect("default"),
        *m.get_one("p_out").expect("default"),
        *m.get_one("seed").expect("required"),
    )?;
    let out: &PathBuf = m.get_one("out").expect("required");
    fs::create_dir_all(out)?;
    fs::write(out.join("graph.txt"), graph.to_edge_list())?;
    fs::write(out.join("labels.txt"), labels_to_text(&graph, &labels))?;
    println!(
        "{} nodes, {} edges, {} labels -> {}",
        graph.node_count(),
        graph.edge_count(),
        labels.label_count(),
        out.display()
    );
    Ok(())
}

fn run_sweep(m: &ArgMatches) -> Result<()> {
    let config = resolve_config(m)?;
    let data = Dataset::from_config(&config)?;
    let param: &String = m.get_one("param").expect("required");
    let values: Vec<String> = m.get_many::<String>("values").expect("required").cloned().collect();
    let seeds: Vec<u64> = m.get_many::<u64>("seeds").expect("required").copied().collect();
    let out: &PathBuf = m.get_one("out").expect("required");
    let rows = sweep(
        &config,
        &data,
        param,
        &values,
        &seeds,
        &SWEEP_POLICIES,
        &RunOptions {
            out_dir: Some(out.clone()),
            deadline: None,
        },
    )?;
    for row in rows {
        println!(
            "{}={} {:<7} macro {:.4} micro {:.4}",
            row.parameter, row.value, row.policy, row.macro_f1, row.micro_f1
        );
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn eval(m: &ArgMatches) -> Result<()> {
    let mut index = NodeIndex::new();
    let emb = read_embeddings(&read(m.get_one::<PathBuf>("embeddings").expect("required"))?, &mut index)?;
    let labels = parse_labels_with(&read(m.get_one::<PathBuf>("labels").expect("required"))?, &mut index)?;
    if index.len() > emb.node_count() {
        bail!("label file names nodes without embeddings");
    }
    let report = cross_validate(
        &emb,
        &labels,
        &labels.labelled_nodes().collect(),
        *m.get_one("folds").expect("default"),
        *m.get_one("k_nn").expect("default"),
        *m.get_one("seed").expect("required"),
    )?;
    let json = serde_json::to_string_pretty(&report)?;
    match m.get_one::<PathBuf>("out") {
        Some(path) => fs::write(path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let matches = cli().get_matches();
    match matches.subcommand() {
        Some(("embed", m)) => embed(m),
        Some(("synth", m)) => synth(m),
        Some(("sweep", m)) => run_sweep(m),
        Some(("eval", m)) => eval(m),
        _ => unreachable!("subcommand required"),
    }
}
