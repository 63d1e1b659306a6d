//! Bid table ingestion, feature assembly, normalization and dataset statistics.

mod features;
mod stats;
mod table;

pub use features::{
    assemble_features, minmax_normalize, screens_by_tender, FeatureMatrix, MinMaxScaler, ScreenTable, FEATURE_COUNT,
    FEATURE_NAMES,
};
pub use stats::{dataset_stats, DatasetStats};
pub use table::{derive_winners, load_bids, read_bids, save_bids, write_bids, BidRecord, BidTable, Schema};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::tensor::Matrix;

    const THREE_ROWS: &str = "\
tender_id,company_id,bid_value,label,winner,location_id,site_id,date,pte
T1,A,100.5,0,1,L1,S1,2004-03-01,120
T1,B,110,1,0,L1,S2,2004-03-01,120
T2,A,95,0,1,L2,S1,2004-05-02,
";

    fn rec(tender: &str, company: &str, value: f64, label: bool) -> BidRecord {
        BidRecord {
            tender_id: tender.into(),
            company_id: company.into(),
            location_id: None,
            site_id: None,
            bid_value: value,
            winner: false,
            date: None,
            pte: None,
            label,
            supplied_screens: None,
        }
    }

    #[test]
    fn loads_rows_in_file_order() {
        let t = read_bids(THREE_ROWS.as_bytes(), "toy", &Schema::default()).unwrap();
        assert_eq!(t.len(), 3);
        let ids: Vec<_> = t
            .records()
            .iter()
            .map(|r| (r.tender_id.as_str(), r.company_id.as_str()))
            .collect();
        assert_eq!(ids, [("T1", "A"), ("T1", "B"), ("T2", "A")]);
        assert_eq!(t.records()[0].bid_value, 100.5);
        assert!(t.records()[1].label);
        assert_eq!(t.records()[0].pte, Some(120.0));
        assert_eq!(t.records()[2].pte, None);
        assert_eq!(t.records()[0].date, Some(12478.0));
    }

    #[test]
    fn missing_date_column_gives_absent_dates() {
        let csv = "tender_id,company_id,bid_value,label\nT1,A,1,0\nT1,B,2,1\n";
        let t = read_bids(csv.as_bytes(), "nodate", &Schema::default()).unwrap();
        assert!(t.records().iter().all(|r| r.date.is_none() && r.location_id.is_none()));
        // winner derived from the lowest bid
        assert!(t.records()[0].winner && !t.records()[1].winner);
    }

    #[test]
    fn missing_mandatory_column_is_listed() {
        let csv = "tender_id,bid_value\nT1,1\n";
        match read_bids(csv.as_bytes(), "bad", &Schema::default()) {
            Err(Error::Schema { missing }) => assert_eq!(missing, ["company_id", "label"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparseable_value_reports_row() {
        let csv = "tender_id,company_id,bid_value,label\nT1,A,1,0\nT1,B,abc,1\n";
        match read_bids(csv.as_bytes(), "bad", &Schema::default()) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_schema_and_delimiter() {
        let csv = "Tender;Firm;Bid;Collusive\nx;a;10;1\nx;b;12;0\n";
        let schema = Schema {
            tender_id: "Tender".into(),
            company_id: "Firm".into(),
            bid_value: "Bid".into(),
            label: "Collusive".into(),
            delimiter: ';',
            ..Schema::default()
        };
        let t = read_bids(csv.as_bytes(), "semi", &schema).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn winner_ties_go_to_lowest_row() {
        let mut recs = vec![
            rec("T", "a", 5.0, false),
            rec("T", "b", 4.0, false),
            rec("T", "c", 4.0, false),
        ];
        derive_winners(&mut recs);
        let w: Vec<bool> = recs.iter().map(|r| r.winner).collect();
        assert_eq!(w, [false, true, false]);
    }

    #[test]
    fn table_needs_a_multi_bid_tender() {
        let err = BidTable::new("x", vec![rec("T1", "a", 1.0, false), rec("T2", "a", 1.0, false)]);
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn features_broadcast_tender_screens() {
        let recs = vec![
            rec("T", "a", 100.0, false),
            rec("T", "b", 110.0, true),
            rec("T", "c", 120.0, false),
            rec("U", "a", 50.0, false),
            rec("U", "b", 55.0, false),
        ];
        let t = BidTable::new("x", recs).unwrap();
        let s = screens_by_tender(&t).unwrap();
        let fm = assemble_features(&t, &s, false).unwrap();
        assert_eq!(fm.matrix.shape(), (5, 10));
        assert_eq!(fm.feature_names(), &FEATURE_NAMES);
        for r in 1..3 {
            assert_eq!(&fm.matrix.row(r)[3..], &fm.matrix.row(0)[3..]);
        }
        assert_eq!(fm.matrix.column(1), vec![3.0, 3.0, 3.0, 2.0, 2.0]);
    }

    #[test]
    fn pte_is_never_a_feature() {
        let t = read_bids(THREE_ROWS.as_bytes(), "toy", &Schema::default()).unwrap();
        let fm = assemble_features(&t, &screens_by_tender(&t).unwrap(), false).unwrap();
        assert_eq!(fm.matrix.cols(), 10);
    }

    #[test]
    fn single_tender_bid_count() {
        let recs = (0..5)
            .map(|i| rec("T", &format!("c{i}"), 10.0 + i as f64, false))
            .collect();
        let t = BidTable::new("x", recs).unwrap();
        let fm = assemble_features(&t, &screens_by_tender(&t).unwrap(), false).unwrap();
        assert!(fm.matrix.column(1).iter().all(|&v| v == 5.0));
    }

    #[test]
    fn missing_tender_screens_is_inconsistent() {
        let t = BidTable::new("x", vec![rec("T", "a", 1.0, false), rec("T", "b", 2.0, false)]).unwrap();
        let err = assemble_features(&t, &ScreenTable::new(), false);
        assert!(matches!(err, Err(Error::Consistency(_))));
    }

    fn col(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix {
            matrix: Matrix::column_vector(values),
        }
    }

    #[test]
    fn minmax_cases() {
        let all = minmax_normalize(&col(&[0.0, 5.0, 10.0]), &[0, 1, 2]).unwrap();
        assert_eq!(all.matrix.data(), &[0.0, 0.5, 1.0]);
        let constant = minmax_normalize(&col(&[7.0, 7.0, 7.0]), &[0, 1, 2]).unwrap();
        assert_eq!(constant.matrix.data(), &[0.0, 0.0, 0.0]);
        let partial = minmax_normalize(&col(&[0.0, 5.0, 10.0]), &[0, 1]).unwrap();
        assert_eq!(partial.matrix.data(), &[0.0, 1.0, 1.0]);
        assert!(minmax_normalize(&col(&[1.0]), &[]).is_err());
    }

    #[test]
    fn stats_small_table() {
        let t = BidTable::new(
            "x",
            vec![
                rec("T", "a", 1.0, true),
                rec("T", "b", 2.0, false),
                rec("U", "a", 1.0, false),
                rec("U", "b", 2.0, false),
            ],
        )
        .unwrap();
        let s = dataset_stats(&t);
        assert_eq!(s.bid_count, 4);
        assert_eq!(s.collusive_share, 0.25);
        assert_eq!(s.mean_bids_per_tender, 2.0);
        assert!(s.to_records().contains("collusive_share=0.25"));
        assert!(s.to_string().contains("25.00%"));
    }

    #[test]
    fn write_then_read_round_trips() {
        let t = read_bids(THREE_ROWS.as_bytes(), "toy", &Schema::default()).unwrap();
        let mut buf = Vec::new();
        write_bids(&t, &Schema::default(), &mut buf).unwrap();
        let back = read_bids(buf.as_slice(), "toy", &Schema::default()).unwrap();
        assert_eq!(back, t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalized_values_in_unit_interval(
                vals in prop::collection::vec(-1e6f64..1e6, 20),
                fit in prop::collection::btree_set(0usize..10, 1..10),
            ) {
                let m = Matrix::from_vec(10, 2, vals).unwrap();
                let fit: Vec<usize> = fit.into_iter().collect();
                let out = minmax_normalize(&FeatureMatrix { matrix: m }, &fit).unwrap();
                prop_assert!(out.matrix.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }

            #[test]
            fn mandatory_columns_round_trip_bitwise(
                bids in prop::collection::vec((0u8..5, 0u8..6, 1e-3f64..1e9, any::<bool>()), 2..30)
            ) {
                let mut recs: Vec<BidRecord> = bids
                    .iter()
                    .map(|&(t, c, v, l)| rec(&format!("t{t}"), &format!("c{c}"), v, l))
                    .collect();
                recs.push(rec("t0", "cx", 1.0, false));
                recs.push(rec("t0", "cy", 2.0, false));
                derive_winners(&mut recs);
                let t = BidTable::new("p", recs).unwrap();
                let mut buf = Vec::new();
                write_bids(&t, &Schema::default(), &mut buf).unwrap();
                let back = read_bids(buf.as_slice(), "p", &Schema::default()).unwrap();
                for (a, b) in t.records().iter().zip(back.records()) {
                    prop_assert_eq!(a.bid_value.to_bits(), b.bid_value.to_bits());
                    prop_assert_eq!(&a.tender_id, &b.tender_id);
                    prop_assert_eq!(&a.company_id, &b.company_id);
                    prop_assert_eq!(a.label, b.label);
                    prop_assert_eq!(a.winner, b.winner);
                }
            }
        }
    }
}
