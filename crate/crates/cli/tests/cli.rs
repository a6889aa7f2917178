use std::path::Path;
use std::process::{Command, Output};

fn pqmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqmc")).current_dir(dir).args(args).output().expect("pqmc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gap_rows_for_chain_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = pqmc(dir.path(), &["gap", "--model", "chain", "--sweep", "n", "--values", "4,6,8"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# pqmc gap rows v1");
    assert_eq!(lines[1], "model,params,gap");
    assert_eq!(lines.len(), 5);
    let last: f64 = lines[4].rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - 0.005885).abs() < 1e-6);
}

#[test]
fn spectrum_csv_has_four_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = pqmc(dir.path(), &["spectrum", "--g", "6", "--out", "s.csv"]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# pqmc spectrum v1"));
    assert_eq!(lines.next(), Some("x,V,psi0,psi1"));
    assert!(lines.all(|l| l.split(',').count() == 4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gap"));
}

#[test]
fn tunneling_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, seed: &'static str| {
        vec![
            "dmc-tunnel", "--gwf", "boltzmann", "--sweep", "g", "--values", "4,5", "--reps", "3", "--walkers", "100",
            "--tau", "0.02", "--seed", seed, "--out", out,
        ]
    };
    assert!(pqmc(dir.path(), &args("a.csv", "3")).status.success());
    assert!(pqmc(dir.path(), &[args("b.csv", "3"), vec!["--threads", "1"]].concat()).status.success());
    assert!(pqmc(dir.path(), &args("c.csv", "4")).status.success());
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert_eq!(read("a.samples.csv"), read("b.samples.csv"));
    let rows = String::from_utf8(read("a.csv")).unwrap();
    assert!(rows.starts_with("# pqmc dmc-tunnel rows v1\ng,x0,gwfMode,tau,Nw,p,xth,reps,xiMean,xiStderr,censoredCount\n"));
    assert!(dir.path().join("a.report.txt").exists());
}

#[test]
fn fit_exit_status_reflects_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("rows.csv"),
        "# pqmc gfmc-tunnel rows v1\n\
         model,params,gwfMode,tau,Nw,p,reps,xiMean,xiStderr,censoredCount\n\
         chain,n=6;j=1;gamma=0.6,none,0.05,100,0.1,10,14.0,1.0,0\n\
         chain,n=8;j=1;gamma=0.6,none,0.05,100,0.1,10,50.0,4.0,0\n\
         chain,n=10;j=1;gamma=0.6,none,0.05,100,0.1,10,150.0,12.0,0\n",
    )
    .unwrap();
    let ok = pqmc(dir.path(), &["fit", "--input", "rows.csv", "--window", "3", "--b-min", "0.8", "--b-max", "1.2"]);
    assert!(ok.status.success(), "{ok:?}");
    assert!(stdout(&ok).contains("tolerance b in [0.8, 1.2]: PASS"));
    let bad = pqmc(dir.path(), &["fit", "--input", "rows.csv", "--window", "3", "--b-min", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn optimized_record_feeds_gfmc_sweep_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = pqmc(dir.path(), &["optimize-gwf", "--model", "chain", "--n", "6", "--gwf", "boltzmann", "--out", "b.gwf"]);
    assert!(o.status.success(), "{o:?}");
    let record = std::fs::read_to_string(dir.path().join("b.gwf")).unwrap();
    assert!(record.starts_with("# pqmc gwf record v1") && record.contains("gwf = boltzmann"));
    std::fs::write(
        dir.path().join("run.cfg"),
        "kind = gfmc-tunnel\ngwf_record = b.gwf\nsweep = n\nvalues = 4, 6, 8\nreps = 3\nwalkers = 100\nwindow = 3\nbootstrap = 50\nout = g.csv\n",
    )
    .unwrap();
    let o = pqmc(dir.path(), &["sweep", "--config", "run.cfg"]);
    assert!(o.status.success(), "{o:?}");
    let rows = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.lines().skip(2).all(|l| l.contains(",boltzmann,")));
    let report = std::fs::read_to_string(dir.path().join("g.report.txt")).unwrap();
    assert!(report.contains("fit boltzmann over 3 smallest gaps"));
}

#[test]
fn invalid_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = pqmc(dir.path(), &["dmc-tunnel", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("repetitions"));
    let o = pqmc(dir.path(), &["gfmc-tunnel", "--model", "shamrock", "--gwf", "urbm"]);
    assert_eq!(o.status.code(), Some(1));
    let o = pqmc(dir.path(), &["fit"]);
    assert_eq!(o.status.code(), Some(1));
}
