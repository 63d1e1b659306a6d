use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::BidTable;
use crate::error::{Error, Result};

/// Minimum number of companies per company-level class for a split.
pub const MIN_COMPANIES_PER_CLASS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        })
    }
}

/// Companies of a table, each flagged collusive when any of its bids is.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanyIndex {
    pub names: Vec<String>,
    /// Company index of every row.
    pub row_company: Vec<usize>,
    pub collusive: Vec<bool>,
    rows: Vec<Vec<usize>>,
}

impl CompanyIndex {
    pub fn from_table(table: &BidTable) -> Self {
        let groups = table.companies();
        let mut row_company = vec![0; table.len()];
        let mut names = Vec::with_capacity(groups.len());
        let mut collusive = Vec::with_capacity(groups.len());
        let mut rows = Vec::with_capacity(groups.len());
        for (c, (name, members)) in groups.into_iter().enumerate() {
            for &r in &members {
                row_company[r] = c;
            }
            names.push(name.to_string());
            collusive.push(members.iter().any(|&r| table.records()[r].label));
            rows.push(members);
        }
        CompanyIndex {
            names,
            row_company,
            collusive,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Rows of `company`, ascending.
    pub fn rows_of(&self, company: usize) -> &[usize] {
        &self.rows[company]
    }

    /// Rows of all `companies`, ascending.
    pub fn rows_of_all(&self, companies: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = companies.iter().flat_map(|&c| self.rows[c].iter().copied()).collect();
        out.sort_unstable();
        out
    }

    /// Companies owning at least one of `rows`, ascending.
    pub fn companies_of_rows(&self, rows: &[usize]) -> Vec<usize> {
        let mut c: Vec<usize> = rows.iter().map(|&r| self.row_company[r]).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Company-level partition with derived per-row assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub companies: Vec<Partition>,
    pub rows: Vec<Partition>,
}

impl SplitAssignment {
    pub fn rows_in(&self, p: Partition) -> Vec<usize> {
        (0..self.rows.len()).filter(|&r| self.rows[r] == p).collect()
    }

    pub fn mask(&self, p: Partition) -> Vec<bool> {
        self.rows.iter().map(|&q| q == p).collect()
    }

    pub fn companies_in(&self, p: Partition) -> Vec<usize> {
        (0..self.companies.len()).filter(|&c| self.companies[c] == p).collect()
    }
}

/// `(train, val, test)` company counts for a class of `n` companies:
/// validation and test each get `⌊n/5⌋`, training takes the rest.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let fifth = n / 5;
    (n - 2 * fifth, fifth, fifth)
}

fn classes(index: &CompanyIndex, subset: impl Iterator<Item = usize>) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for c in subset {
        by_class[usize::from(index.collusive[c])].push(c);
    }
    by_class
}

/// Shuffles each company class with `seed` and assigns 60/20/20.
pub fn company_split(index: &CompanyIndex, seed: u64) -> Result<SplitAssignment> {
    let by_class = classes(index, 0..index.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut companies = vec![Partition::Train; index.len()];
    for (cls, mut members) in by_class.into_iter().enumerate() {
        if members.len() < MIN_COMPANIES_PER_CLASS {
            return Err(Error::Split(format!(
                "{} {} companies; at least {MIN_COMPANIES_PER_CLASS} per class are needed (consider fewer folds or a larger dataset)",
                members.len(),
                if cls == 1 { "collusive" } else { "non-collusive" },
            )));
        }
        members.shuffle(&mut rng);
        let (train, val, _) = split_sizes(members.len());
        for (k, &c) in members.iter().enumerate() {
            companies[c] = if k < train {
                Partition::Train
            } else if k < train + val {
                Partition::Val
            } else {
                Partition::Test
            };
        }
    }
    let rows = index.row_company.iter().map(|&c| companies[c]).collect();
    Ok(SplitAssignment { companies, rows })
}

/// One cross-validation fold, as row lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
}

/// Company-level `k`-fold partition of the companies owning `rows`,
/// stratified by company class.
pub fn company_folds(index: &CompanyIndex, rows: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!(
            "cross-validation needs at least 2 folds, got {k}"
        )));
    }
    let by_class = classes(index, index.companies_of_rows(rows).into_iter());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![usize::MAX; index.len()];
    for (cls, mut members) in by_class.into_iter().enumerate() {
        if members.len() < k {
            return Err(Error::Split(format!(
                "{} {} companies cannot fill {k} folds",
                members.len(),
                if cls == 1 { "collusive" } else { "non-collusive" },
            )));
        }
        members.shuffle(&mut rng);
        for (j, &c) in members.iter().enumerate() {
            fold_of[c] = j % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (val_rows, train_rows) = rows.iter().partition(|&&r| fold_of[index.row_company[r]] == f);
            Fold { train_rows, val_rows }
        })
        .collect())
}
