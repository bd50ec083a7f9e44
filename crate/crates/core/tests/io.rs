mod common;

use common::{linear_wave, problem};
use proptest::prelude::*;
use std::path::PathBuf;
use strata_core::config::{load, parse_run_config, parse_table_csv};
use strata_core::continuation::{CurveRow, Orientation, Tangent};
use strata_core::error::Error;
use strata_core::height_solver::{FarField, StripGrid, WaveState};
use strata_core::io::{load_state, read_curve_csv, read_state, save_state, write_curve_csv, write_state_csv, PointMeta};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn state_bytes(state: &WaveState, grid: &StripGrid) -> (Vec<u8>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    save_state(dir.path(), "s", state, grid, None).unwrap();
    (
        std::fs::read(dir.path().join("s.csv")).unwrap(),
        std::fs::read(dir.path().join("s.json")).unwrap(),
    )
}

#[test]
fn state_roundtrip_is_bit_exact() {
    let wave = linear_wave();
    let dir = tempfile::tempdir().unwrap();
    let point = PointMeta {
        index: 3,
        s: 0.125,
        ds: 0.05,
        streak: 2,
        orientation: Orientation {
            froude: 0.1,
            amplitude: 0.9,
        },
        tangent: Some(Tangent {
            x: (0..wave.grid.unknowns()).map(|k| (k as f64).sin() / 3.0).collect(),
            froude: 0.1,
        }),
    };
    save_state(dir.path(), "point_0003", &wave.state, &wave.grid, Some(point.clone())).unwrap();
    let (s, g, meta) = load_state(dir.path(), "point_0003", &wave.problem.bg).unwrap();
    assert_eq!(g.nq, wave.grid.nq);
    assert_eq!(g.q_nodes, wave.grid.q_nodes);
    assert_eq!(s.w, wave.state.w);
    assert_eq!(s.ghost, wave.state.ghost);
    assert_eq!(s.froude.to_bits(), wave.state.froude.to_bits());
    assert_eq!(s.residual_norm.to_bits(), wave.state.residual_norm.to_bits());
    assert_eq!(meta, Some(point));
    // saving the loaded state again reproduces the same bytes
    let a = state_bytes(&wave.state, &wave.grid);
    let b = state_bytes(&s, &g);
    assert_eq!(a, b);
}

#[test]
fn read_state_rejects_damaged_input() {
    let p = problem(0.0, 32);
    let grid = StripGrid::new(20.0, 40, &p.bg, FarField::DirichletZero).unwrap();
    let (csv, json) = state_bytes(&WaveState::laminar(&grid, 1.2), &grid);
    assert!(read_state(&csv, &json, &p.bg).is_ok());

    let text = String::from_utf8(csv.clone()).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let truncated = lines[..lines.len() - 1].join("\n");
    lines.swap(1, 2);
    let swapped = lines.join("\n");
    let json_text = String::from_utf8(json.clone()).unwrap();
    let cases: Vec<(Vec<u8>, Vec<u8>)> = vec![
        (truncated.into_bytes(), json.clone()),
        (swapped.into_bytes(), json.clone()),
        (text.replacen("q,p,w", "q,p,h", 1).into_bytes(), json.clone()),
        (format!("{text}20,0,0\n").into_bytes(), json.clone()),
        (text.replacen(",0\n", ",NaN\n", 1).into_bytes(), json.clone()),
        (csv.clone(), b"{}".to_vec()),
        (csv.clone(), json_text.replacen("\"F\": 1.2", "\"F\": -1.2", 1).into_bytes()),
        (csv.clone(), json_text.replacen("\"nq\": 40", "\"nq\": 41", 1).into_bytes()),
    ];
    for (k, (c, j)) in cases.iter().enumerate() {
        assert!(*c != csv || *j != json, "case {k} is unchanged");
        let e = read_state(c, j, &p.bg);
        assert!(matches!(e, Err(Error::Parse { .. }) | Err(Error::Input(_))), "case {k}: {e:?}");
    }
    // a background with a different column size cannot host the state
    let other = problem(0.0, 48).bg;
    assert!(read_state(&csv, &json, &other).is_err());
}

#[test]
fn state_csv_is_q_major_long_format() {
    let p = problem(0.0, 32);
    let grid = StripGrid::new(20.0, 40, &p.bg, FarField::DirichletZero).unwrap();
    let mut buf = Vec::new();
    write_state_csv(&mut buf, &WaveState::laminar(&grid, 1.2), &grid).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,p,w"));
    assert_eq!(lines.next(), Some("0,-1,0"));
    assert_eq!(lines.nth(31), Some("0,0,0"));
    assert_eq!(text.lines().count(), 1 + 41 * 33);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, Just(0.0), (1e-300..1e300f64)]
}

fn curve_rows() -> impl Strategy<Value = Vec<CurveRow>> {
    prop::collection::vec((prop::array::uniform10(finite()), any::<bool>()), 0..8).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(index, (v, gate_passed))| CurveRow {
                index,
                s: v[0],
                froude: v[1],
                amplitude: v[2],
                min_hp: v[3],
                max_hp: v[4],
                n_s: v[5],
                flow_force_drift: v[6],
                norm_w: v[7],
                f_minus_fcr: v[8],
                q_max: v[9],
                gate_passed,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn curve_csv_roundtrips_exactly(rows in curve_rows()) {
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows).unwrap();
        let back = read_curve_csv(&buf).unwrap();
        prop_assert_eq!(&back, &rows);
        let mut again = Vec::new();
        write_curve_csv(&mut again, &back).unwrap();
        prop_assert_eq!(buf, again);
    }
}

#[test]
fn curve_csv_rejects_gaps_and_bad_headers() {
    let head = "index,s,F,amplitude,min_hp,max_hp,N_s,flow_force_drift,norm_w,f_minus_fcr,q_max,gate_passed\n";
    let row = |i: usize| format!("{i},0,1.1,0.01,1,1.2,0.3,1e-9,0.1,0.05,40,true\n");
    assert_eq!(read_curve_csv(format!("{head}{}{}", row(0), row(1)).as_bytes()).unwrap().len(), 2);
    assert!(read_curve_csv(format!("{head}{}{}", row(0), row(2)).as_bytes()).is_err());
    assert!(read_curve_csv(format!("{}{}", head.replace("N_s", "Ns"), row(0)).as_bytes()).is_err());
    assert!(read_curve_csv(format!("{head}0,0,1.1\n").as_bytes()).is_err());
}

#[test]
fn shipped_configs_load() {
    for name in ["constant", "linear", "linear_unit", "eulerian_tanh"] {
        let cfg = load(&configs_dir().join(format!("{name}.toml"))).unwrap();
        cfg.stratified.validate().unwrap();
    }
}

#[test]
fn table_profiles_resolve_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("rho.csv"),
        "p,rho\n-1,1.3\n-0.75,1.225\n-0.5,1.15\n-0.25,1.075\n0,1\n",
    )
    .unwrap();
    let cfg = "[density]\nprofile = \"table\"\nfile = \"rho.csv\"\n[shear]\nprofile = \"constant\"\nvalue = 1.0\n";
    std::fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let loaded = load(&dir.path().join("run.toml")).unwrap();
    assert_eq!(loaded.table_files, vec![dir.path().join("rho.csv")]);
    std::fs::remove_file(dir.path().join("rho.csv")).unwrap();
    assert!(matches!(load(&dir.path().join("run.toml")), Err(Error::Io { .. })));
}

#[test]
fn config_errors_are_reported() {
    let base = "[density]\nprofile = \"constant\"\nvalue = 1.0\n[shear]\nprofile = \"constant\"\nvalue = 1.0\n";
    assert!(parse_run_config(base).is_ok());
    for bad in [
        "",
        "[density]\nprofile = \"constant\"\nvalue = 1.0\n",
        &format!("{base}[grid]\ndq = 0.0\n"),
        &format!("{base}[grid]\nnodes = 40\n"),
        &format!("{base}[continuation]\nfarfield = \"robin\"\n"),
        "[density]\nprofile = \"cubic\"\nvalue = 1.0\n[shear]\nprofile = \"constant\"\nvalue = 1.0\n",
        "not toml at all [",
    ] {
        assert!(parse_run_config(bad).is_err(), "accepted: {bad:?}");
    }
}

#[test]
fn table_spline_reproduces_a_cubic() {
    let f = |x: f64| 1.0 - 0.3 * x + 0.2 * x * x * x;
    let text: String = std::iter::once("p,v\n".to_string())
        .chain((0..=20).map(|k| {
            let x = -1.0 + k as f64 / 20.0;
            format!("{x},{}\n", f(x))
        }))
        .collect();
    let s = parse_table_csv(text.as_bytes()).unwrap();
    for k in 0..=97 {
        let x = -1.0 + k as f64 / 97.0;
        assert!((s.eval(x).0 - f(x)).abs() < 1e-3, "x = {x}");
    }
    assert!(parse_table_csv(b"p,v\n0,1\n-1,2\n").is_err());
    assert!(parse_table_csv(b"").is_err());
}
