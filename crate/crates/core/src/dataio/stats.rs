use std::fmt;

use super::BidTable;

/// Descriptive statistics of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub name: String,
    pub bid_count: usize,
    pub tender_count: usize,
    pub company_count: usize,
    /// Fraction of bids labeled collusive, in `[0, 1]`.
    pub collusive_share: f64,
    pub mean_bids_per_tender: f64,
}

pub fn dataset_stats(table: &BidTable) -> DatasetStats {
    let m = table.len();
    let tenders = table.tenders().len();
    let collusive = table.records().iter().filter(|r| r.label).count();
    DatasetStats {
        name: table.name().to_string(),
        bid_count: m,
        tender_count: tenders,
        company_count: table.companies().len(),
        collusive_share: collusive as f64 / m as f64,
        mean_bids_per_tender: m as f64 / tenders as f64,
    }
}

impl DatasetStats {
    /// `key=value` lines for machine consumption.
    pub fn to_records(&self) -> String {
        format!(
            "dataset={}\nbid_count={}\ntender_count={}\ncompany_count={}\ncollusive_share={}\nmean_bids_per_tender={}\n",
            self.name,
            self.bid_count,
            self.tender_count,
            self.company_count,
            self.collusive_share,
            self.mean_bids_per_tender
        )
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Dataset: {}", self.name)?;
        writeln!(f, "  Number of bids:                 {}", self.bid_count)?;
        writeln!(f, "  Tenders:                        {}", self.tender_count)?;
        writeln!(f, "  Companies:                      {}", self.company_count)?;
        writeln!(
            f,
            "  Percentage of collusive bids:   {:.2}%",
            self.collusive_share * 100.0
        )?;
        write!(f, "  Average number of bids/auction: {:.2}", self.mean_bids_per_tender)
    }
}
