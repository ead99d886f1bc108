use eqdrift::data::{
    load_csv, load_french, parse_csv, parse_french, slice, weekday_calendar, DateRange,
    FrenchOptions, ReturnPanel, TradingDate,
};
use eqdrift::Error;
use proptest::prelude::*;

fn date(v: u32) -> TradingDate {
    TradingDate::from_yyyymmdd(v).unwrap()
}

#[test]
fn loads_french_file_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("48_Industry_Portfolios_daily.txt");
    let text = "\
 This file was created by CMPT_IND_RETS_DAILY.

  Average Value Weighted Returns -- Daily
          Agric    Food    Hlth   Other
19870101    1.00   -2.50    0.10    0.00
19870102  -99.99    0.25   -0.10    3.00
19870105    0.50    0.50    0.50    0.50

  Average Equal Weighted Returns -- Daily
          Agric    Food    Hlth   Other
19870101    7.00    7.00    7.00    7.00
";
    std::fs::write(&path, text).unwrap();
    let opts = FrenchOptions {
        drop_assets: vec!["Hlth".into()],
        date_range: None,
    };
    let p = load_french(&path, &opts).unwrap();
    assert_eq!(p.assets(), &["Agric", "Food", "Other"]);
    assert_eq!(p.n_dates(), 3);
    assert_eq!(p.row(0), &[0.01, -0.025, 0.0]);
    assert!(p.is_missing(1, 0));
    assert!(matches!(
        load_french(dir.path().join("absent.txt"), &opts),
        Err(Error::Io(_))
    ));
}

#[test]
fn out_of_order_dates_rejected() {
    let text = "  A  B\n19870102 1 2\n19870101 1 2\n19870105 1 2\n";
    assert_eq!(
        parse_french(text, &FrenchOptions::default()),
        Err(Error::NonMonotonicDates {
            line: 3,
            date: date(19870101)
        })
    );
    let csv = "date,A\n20000104,0.1\n20000104,0.2\n";
    assert!(matches!(
        parse_csv(csv),
        Err(Error::NonMonotonicDates { line: 3, .. })
    ));
}

#[test]
fn malformed_rows_report_line_numbers() {
    assert!(matches!(
        parse_french("  A  B\n19870101 1\n", &FrenchOptions::default()),
        Err(Error::Parse { line: 2, .. })
    ));
    assert!(matches!(
        parse_csv("date,A\n20000103,abc\n"),
        Err(Error::Parse { line: 2, .. })
    ));
    assert_eq!(
        parse_french("just words\n", &FrenchOptions::default()),
        Err(Error::EmptyPanel)
    );
}

#[test]
fn slice_examples() {
    let rows: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64 * 0.01]).collect();
    let dates = weekday_calendar(date(20000103), 5);
    let p = ReturnPanel::from_rows(dates.clone(), vec!["A".into()], &rows).unwrap();
    assert_eq!(
        slice(&p, &DateRange::new(dates[0], dates[4]).unwrap()).unwrap(),
        p
    );
    let one = slice(&p, &DateRange::new(dates[2], dates[2]).unwrap()).unwrap();
    assert_eq!(one.n_dates(), 1);
    assert_eq!(one.row(0), &[0.02]);
    let far = DateRange::new(date(20100101), date(20100201)).unwrap();
    assert_eq!(slice(&p, &far), Err(Error::EmptyPanel));
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    let p = parse_csv("date,A,B\n20000103,0.01,NA\n20000104,,0.5\n").unwrap();
    p.write_csv(&path).unwrap();
    assert_eq!(load_csv(&path).unwrap(), p);
}

fn panel_strategy() -> impl Strategy<Value = ReturnPanel> {
    (1usize..5, 1usize..30).prop_flat_map(|(n, t)| {
        (
            prop::collection::vec(prop_oneof![4 => -1.0f64..1.0, 1 => Just(f64::NAN)], n * t),
            prop::collection::vec(1u32..5, t),
        )
            .prop_map(move |(vals, gaps)| {
                let mut d = date(19900101).naive();
                let dates = gaps
                    .iter()
                    .map(|g| {
                        d = d + chrono::Days::new(*g as u64);
                        TradingDate::from(d)
                    })
                    .collect();
                let missing = vals.iter().map(|v| v.is_nan()).collect();
                let assets = (0..n).map(|i| format!("S{i}")).collect();
                ReturnPanel::new(dates, assets, vals, missing).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(p in panel_strategy()) {
        prop_assert_eq!(parse_csv(&p.to_csv_string()).unwrap(), p);
    }

    #[test]
    fn date_text_round_trip(days in 0u64..50_000) {
        let d = TradingDate::from(date(19000101).naive() + chrono::Days::new(days));
        prop_assert_eq!(d.to_string().parse::<TradingDate>().unwrap(), d);
    }
}
