use pifit::data::{format_check, load_csv, write_csv, RawTable};
use pifit::report::{tidy, FitReport, RowKind};
use pifit::{example_data, fit_all, high_res_grid, Dataset, FitOptions};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4, prop::collection::vec((0.0..1e6f64, any::<f64>()), 5..30)).prop_map(|(id, rows)| {
        let (irradiance, rate): (Vec<f64>, Vec<f64>) = rows
            .into_iter()
            .map(|(i, p)| (i, if p.is_finite() { p } else { 0.5 }))
            .unzip();
        Dataset::new(format!("PI{id:06}"), irradiance, rate)
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(d in dataset()) {
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&d), &mut buf).unwrap();
        let raw = load_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(raw.rows.len(), d.len());
        for (row, (i, p)) in raw.rows.iter().zip(d.irradiance.iter().zip(&d.rate)) {
            prop_assert_eq!(row.irradiance.parse::<f64>().unwrap().to_bits(), i.to_bits());
            prop_assert_eq!(row.rate.parse::<f64>().unwrap().to_bits(), p.to_bits());
        }
    }

    #[test]
    fn format_check_is_idempotent(d in dataset()) {
        let first = format_check(&RawTable::from_datasets(std::slice::from_ref(&d)));
        if first.is_clean() {
            let again = format_check(&RawTable::from_datasets(&first.datasets));
            prop_assert!(again.is_clean());
            prop_assert_eq!(again.datasets, first.datasets);
        }
    }
}

#[test]
fn bundled_examples_round_trip() {
    let data = example_data();
    let mut buf = Vec::new();
    write_csv(&data, &mut buf).unwrap();
    let back = format_check(&load_csv(buf.as_slice()).unwrap());
    assert!(back.is_clean());
    assert_eq!(back.datasets, data);
}

#[test]
fn experiments_are_split_by_identifier() {
    let csv = "pi_information,I,P\nB,0,0\nA,0,0\nA,10,1\nB,10,1\nA,20,2\nA,40,3\nA,80,4\nB,20,2\nB,40,3\nB,80,3.5\n";
    let r = format_check(&load_csv(csv.as_bytes()).unwrap());
    assert!(r.is_clean());
    let ids: Vec<&str> = r.datasets.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["B", "A"]);
    assert_eq!(r.datasets[1].rate, [0.0, 1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn high_res_grid_spans_the_observations() {
    let d = &example_data()[0];
    let g = high_res_grid(d, 200).unwrap();
    assert_eq!(g.len(), 200);
    assert_eq!(g[0], 0.0);
    assert_eq!(*g.last().unwrap(), d.max_irradiance());
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    assert!(high_res_grid(d, 1).is_err());
}

#[test]
fn tidy_lists_every_free_parameter_once() {
    let d = &example_data()[2];
    let fits = fit_all(d, &FitOptions::default()).unwrap();
    let reports = FitReport::from_model_fits(d, fits.clone(), 0.95);
    let rows = tidy(&reports).unwrap();
    for f in fits.iter().filter_map(|f| f.ok()).filter(|f| f.converged) {
        for p in f.params.names() {
            let n = rows
                .iter()
                .filter(|r| r.model == f.model && r.kind == RowKind::Parameter && r.quantity == p.as_str())
                .count();
            assert_eq!(n, 1, "{} {p}", f.model);
        }
    }
    let mut keys: Vec<_> = rows.iter().map(|r| (r.model, r.quantity.clone())).collect();
    let before = keys.len();
    keys.dedup();
    assert_eq!(keys.len(), before, "tidy rows are unique and grouped by model");
}
