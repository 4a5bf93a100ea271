// The full command-line pipeline driven from code: gen-data, fit, eval.
//
// Equivalent to
//
// ```text
// tube gen-data --config cfg.json --out run
// tube fit      --config cfg.json --out run
// tube eval     --config cfg.json --out run
// ```

use std::fs;

use tube::cli::{run, Cli};
use clap::Parser;

const CONFIG: &str = r#"{
    "schema_version": 1,
    "seed": 21,
    "space": {"vocab_size": 3, "length": 3},
    "data": {"train_size": 500, "test_size": 16},
    "model": {"finetune_size": 200},
    "eval": {"reseeds": 2}
}"#;

pub fn run_example() -> tube::Result<()> {
    let dir = std::env::temp_dir().join(format!("tube-cli-example-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let config = dir.join("cfg.json");
    fs::write(&config, CONFIG)?;
    let out = dir.join("run");
    for command in ["gen-data", "fit", "eval"] {
        let cli = Cli::try_parse_from(["tube", command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .map_err(|e| tube::Error::Config(e.to_string()))?;
        let manifest = run(&cli.command)?;
        println!("{command}: {}", manifest.display());
    }
    print!("{}", fs::read_to_string(out.join("table.csv"))?);
    fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
