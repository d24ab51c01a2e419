//! Runs the `occ` command pipeline in-process: generate a scene, build
//! v_init, predict pseudo labels, augment, evaluate and refine.
//!
//! cargo run --release -p occ-service --example cli_pipeline

use occ_service::cli::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("occ-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let root = dir.to_string_lossy().into_owned();
    let (scene, init, pseudo, aug, gt, fine) = (p("scene.json"), p("v_init.occ1"), p("v_pseudo.occ1"), p("v_aug.occ1"), p("gt.occ1"), p("fine.occ1"));

    let steps: Vec<Vec<&str>> = vec![
        vec!["gen", "--seed", "7", "--frame", "2", "--out", &root],
        vec!["superimpose", "--scene", &scene, "--frame", "2", "--out", &init],
        vec!["predict", "--scene", &scene, "--frame", "2", "--out", &pseudo],
        vec!["augment", "--init", &init, "--pseudo", &pseudo, "--out", &aug],
        vec!["eval", "--pred", &aug, "--gt", &gt],
        vec!["refine", "--scene", &scene, "--frame", "2", "--out", &fine],
        vec!["eval", "--pred", &fine, "--gt", &gt],
    ];
    for args in steps {
        let args: Vec<&str> = std::iter::once("occ").chain(args).collect();
        println!("$ {}", args.join(" "));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(&args, &mut out, &mut err);
        print!("{}", String::from_utf8_lossy(&out));
        eprint!("{}", String::from_utf8_lossy(&err));
        if code != 0 {
            return Err(format!("{} exited with {code}", args[1]).into());
        }
    }

    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(["occ", "eval", "--pred", &aug], &mut out, &mut err);
    println!("$ occ eval --pred … (missing --gt) -> exit {code}");
    print!("{}", String::from_utf8_lossy(&err));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
