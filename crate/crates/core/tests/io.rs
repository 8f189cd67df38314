use horseshoe_em::io::{
    emit_shrinkage_profile, read_csv, read_csv_from, read_fit, write_fit, write_fit_file, write_profile, CsvSelection,
    FitEcho, Grid,
};
use horseshoe_em::models::{linear_fit, ModelKind};
use horseshoe_em::{EmConfig, Error, FitResult, ShrinkageState};
use ndarray::{array, Array1};

const DIABETES_COLUMNS: [&str; 10] = ["AGE", "SEX", "BMI", "BP", "S1", "S2", "S3", "S4", "S5", "S6"];

fn target(name: &str) -> CsvSelection {
    CsvSelection {
        target: name.into(),
        features: None,
    }
}

fn names(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn result_with(beta: Array1<f64>) -> FitResult {
    let p = beta.len();
    FitResult {
        conditional_mean: beta.clone(),
        beta,
        intercept: 152.133_484_162_895_9,
        state: ShrinkageState {
            lambda_sq: Array1::ones(p),
            tau_sq: 0.012_345_678_901_234_5,
            sigma_sq: 2_932.687_179_140_46,
        },
        iters: 17,
        converged: true,
        trace: Vec::new(),
    }
}

fn echo(n: usize) -> FitEcho {
    FitEcho {
        model: ModelKind::Linear,
        target: "Y".into(),
        n,
        config: EmConfig::default(),
    }
}

#[test]
fn well_formed_three_by_two() {
    let t = read_csv_from("a,y\n1,2\n3,4\n5,6\n".as_bytes(), &target("y")).unwrap();
    assert_eq!((t.rows(), t.cols()), (3, 1));
    assert_eq!(t.y, array![2.0, 4.0, 6.0]);
    assert_eq!(t.feature_names, vec!["a"]);
}

#[test]
fn missing_cell_names_row_and_column() {
    let mut text = String::from("age,bmi,y\n");
    for i in 0..9 {
        let bmi = if i == 6 { "NA".to_string() } else { format!("{}.5", 20 + i) };
        text.push_str(&format!("{},{bmi},{}\n", 40 + i, i));
    }
    let err = read_csv_from(text.as_bytes(), &target("y")).unwrap_err();
    assert_eq!(err.to_string(), "row 7, column bmi: unparseable");
    assert!(err.is_input_error());
}

#[test]
fn diabetes_layout_parses_ten_predictors() {
    let mut text = DIABETES_COLUMNS.join(",") + ",Y\n";
    for i in 0..12 {
        let row: Vec<String> = (0..11).map(|j| format!("{}", (i * 11 + j) as f64 * 0.37 - 3.0)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let t = read_csv_from(text.as_bytes(), &target("Y")).unwrap();
    assert_eq!(t.cols(), 10);
    assert_eq!(t.feature_names, names(&DIABETES_COLUMNS));
}

#[test]
fn input_errors() {
    assert!(read_csv_from("".as_bytes(), &target("y")).is_err());
    assert!(read_csv_from("a,y\n".as_bytes(), &target("y")).is_err());
    let err = read_csv_from("a,b\n1,2\n".as_bytes(), &target("y")).unwrap_err();
    assert!(err.to_string().contains("'y'"));
    let sel = CsvSelection {
        target: "y".into(),
        features: Some(vec!["b".into()]),
    };
    let t = read_csv_from("a,b,y\n1,2,3\n4,5,6\n".as_bytes(), &sel).unwrap();
    assert_eq!(t.x, array![[2.0], [5.0]]);
    assert!(matches!(
        read_csv(std::path::Path::new("/nonexistent/file.csv"), &target("y")),
        Err(Error::Io(_))
    ));
}

#[test]
fn decimal_point_is_locale_independent() {
    let err = read_csv_from("a,y\n\"1,5\",2\n".as_bytes(), &target("y")).unwrap_err();
    assert_eq!(err.to_string(), "row 1, column a: unparseable");
    let t = read_csv_from("a,y\n 1.5e0 ,-.25\n".as_bytes(), &target("y")).unwrap();
    assert_eq!((t.x[[0, 0]], t.y[0]), (1.5, -0.25));
}

#[test]
fn all_zero_fit_block() {
    let result = result_with(Array1::zeros(4));
    let mut buf = Vec::new();
    write_fit(&mut buf, &result, &names(&["a", "b", "c", "d"]), &echo(10)).unwrap();
    let report = read_fit(buf.as_slice()).unwrap();
    assert_eq!(report.coefficients.len(), 4);
    assert!(report.coefficients.iter().all(|c| c.estimate == 0.0 && c.zero));
    assert_eq!(report.fields["selected"], "0");
}

#[test]
fn sparse_diabetes_row_serializes_exact_zeros() {
    let beta = array![0.0, -17.54, 5.741, 1.021, 0.0, 0.0, -0.909, 0.0, 43.58, 0.0];
    let result = result_with(beta.clone());
    let mut buf = Vec::new();
    write_fit(&mut buf, &result, &names(&DIABETES_COLUMNS), &echo(442)).unwrap();
    let report = read_fit(buf.as_slice()).unwrap();
    assert_eq!(report.coefficients.iter().filter(|c| c.zero).count(), 5);
    assert_eq!(report.coefficients.iter().filter(|c| !c.zero).count(), 5);
    for (row, b) in report.coefficients.iter().zip(beta.iter()) {
        assert_eq!(row.estimate, *b);
        assert_eq!(row.zero, *b == 0.0);
    }
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("\nS6,0.0000000000000000e0,true\n"), "{text}");
}

#[test]
fn report_round_trips_bit_for_bit() {
    let beta = array![1.0 / 3.0, -2.0f64.sqrt(), 1e-300, 0.0, 123_456_789.123_456_78];
    let result = result_with(beta.clone());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fit.txt");
    write_fit_file(&path, &result, &names(&["a", "b", "c", "d", "e"]), &echo(9)).unwrap();
    let report = read_fit(std::fs::File::open(&path).unwrap()).unwrap();
    for (row, b) in report.coefficients.iter().zip(beta.iter()) {
        assert_eq!(row.estimate.to_bits(), b.to_bits());
    }
    assert_eq!(report.get_f64("intercept").unwrap().to_bits(), result.intercept.to_bits());
    assert_eq!(report.get_f64("tau_sq").unwrap().to_bits(), result.state.tau_sq.to_bits());
    assert_eq!(report.get_f64("sigma_sq").unwrap().to_bits(), result.state.sigma_sq.to_bits());
    assert_eq!(report.fields["iterations"], "17");
    assert_eq!(report.fields["converged"], "true");
    assert_eq!(report.fields["estep"], "exact");
}

#[test]
fn fit_reports_are_byte_stable() {
    let x = array![[1.0, 0.3], [2.0, -0.1], [3.0, 0.7], [4.0, 0.2], [5.0, -0.4], [6.0, 0.0]];
    let y = array![2.1, 3.9, 6.2, 8.0, 9.8, 12.1];
    let render = || {
        let fit = linear_fit(x.view(), y.view(), None, &EmConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_fit(&mut buf, &fit, &names(&["u", "v"]), &echo(6)).unwrap();
        buf
    };
    assert_eq!(render(), render());
}

#[test]
fn profile_csv_layout() {
    let grid: Grid = "-2:2:0.5".parse().unwrap();
    let profile = emit_shrinkage_profile(0.3, grid, &EmConfig::default()).unwrap();
    assert_eq!(profile.len(), 9);
    let mut buf = Vec::new();
    write_profile(&mut buf, &profile).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta_ls,beta_hat"));
    assert_eq!(lines.count(), 9);
    assert!(emit_shrinkage_profile(1.0, grid, &EmConfig::default()).is_err());
    assert!(emit_shrinkage_profile(0.0, grid, &EmConfig::default()).is_err());
    assert!("1:0:0.1".parse::<Grid>().unwrap().points().is_err());
    assert!("0:1:0".parse::<Grid>().unwrap().points().is_err());
    assert!("0:1".parse::<Grid>().is_err());
}

#[test]
fn profile_is_odd_and_monotone() {
    let grid = Grid {
        lo: -12.0,
        hi: 12.0,
        step: 0.1,
    };
    let profile = emit_shrinkage_profile(0.5, grid, &EmConfig::default()).unwrap();
    let k = profile.len();
    for i in 0..k {
        let (a, b) = (profile[i], profile[k - 1 - i]);
        assert_eq!(a.beta_ls, -b.beta_ls);
        assert!((a.beta_hat + b.beta_hat).abs() < 1e-8);
    }
    let zero = profile.iter().find(|pt| pt.beta_ls == 0.0).unwrap();
    assert_eq!(zero.beta_hat, 0.0);
    let upper: Vec<f64> = profile.iter().filter(|pt| pt.beta_ls >= 0.0).map(|pt| pt.beta_hat).collect();
    assert!(upper.windows(2).all(|w| w[1] >= w[0]), "{upper:?}");
}
