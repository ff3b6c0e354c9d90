//! Drives the `mtad` command pipeline end to end on a small configuration:
//! synth, prepare (holding out U-turns), train and score two variants, then
//! compare them. Everything lands under one output directory.
//!
//! ```text
//! cargo run --release --example cli_pipeline -- [out-dir]
//! ```

use std::path::PathBuf;

use mtad::cli::main_with_args;

const CONFIG: &str = r#"
[synth]
seed = 11
duration_s = 2400

# Label mix in shares of driving time; U-turns are boosted so the held-out
# class is visible in the test split.
[synth.p]
background = 0.8515
intersection_passing = 0.06
left_turn = 0.0258
right_turn = 0.0231
left_lane_change = 0.0054
right_lane_change = 0.005
crosswalk_passing = 0.0027
u_turn = 0.05
left_lane_branch = 0.002
right_lane_branch = 0.0008
merge = 0.0014

[model]
hidden_size = 12

[model.loss_weights]
reconstruction = 1.0
symbols = 0.001
regularization = 0.0

[train]
epochs = 3
batch_size = 32
"#;

fn main() {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("mtad-cli-example"));
    std::fs::create_dir_all(&out).expect("output directory");
    let config = out.join("config.toml");
    std::fs::write(&config, CONFIG).expect("config file");
    let (o, c) = (out.to_str().unwrap(), config.to_str().unwrap());

    let steps: Vec<Vec<&str>> = vec![
        vec!["synth"],
        vec!["prepare", "--exclude-label", "u_turn"],
        vec!["train", "--variant", "multitask"],
        vec!["train", "--variant", "baseline_ae"],
        vec!["score", "--variant", "multitask"],
        vec!["score", "--variant", "baseline_ae"],
        vec!["compare", "--variant", "multitask,baseline_ae"],
    ];
    for step in steps {
        let mut args = vec!["mtad"];
        args.extend(&step);
        args.extend(["--out", o, "--config", c]);
        println!("$ {}", args.join(" "));
        let code = main_with_args(&args);
        if code != 0 {
            eprintln!("step failed with exit code {code}");
            std::process::exit(code);
        }
    }
    for table in ["reconstruction_mse.csv", "detection.csv", "anomaly_detection.csv"] {
        let path = out.join("compare").join(table);
        println!("\n{}:\n{}", path.display(), std::fs::read_to_string(&path).unwrap_or_default());
    }
}
