use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::dataio::{BidRecord, BidTable};
use crate::error::{Error, Result};
use crate::graph::RelationKind;

/// Parameters of the planted-cartel generator.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub name: String,
    pub n_tenders: usize,
    pub companies: usize,
    pub cartel_size: usize,
    /// Share of tenders rigged by the cartel.
    pub participation_rate: f64,
    /// Mean relative price inflation of rigged tenders.
    pub markup: f64,
    /// Factor applied to the spread of rigged bids around their mean.
    pub shrink: f64,
    /// Rigged tenders are bid only by cartel members, with a rotating
    /// designated winner. When off, rigged tenders pick bidders and winners
    /// like competitive ones, so only prices can tell them apart.
    pub co_bidding: bool,
    /// Relative standard deviation of competitive bids.
    pub bid_sd: f64,
    pub min_bidders: usize,
    pub max_bidders: usize,
    pub locations: usize,
    pub sites: usize,
    /// Which relation identifiers to emit; tender and competitor relations
    /// are always derivable.
    pub emit_locations: bool,
    pub emit_sites: bool,
    pub emit_dates: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: "synthetic".into(),
            n_tenders: 400,
            companies: 60,
            cartel_size: 8,
            participation_rate: 0.35,
            markup: 0.15,
            shrink: 0.5,
            co_bidding: true,
            bid_sd: 0.10,
            min_bidders: 3,
            max_bidders: 6,
            locations: 200,
            sites: 600,
            emit_locations: true,
            emit_sites: true,
            emit_dates: true,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Rigged tenders drawn exactly like competitive ones, in prices and in
    /// who bids.
    pub fn null_signal() -> Self {
        SynthConfig {
            name: "synthetic-null".into(),
            markup: 0.0,
            shrink: 1.0,
            co_bidding: false,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.cartel_size < 2 {
            return fail(format!("cartel_size must be at least 2, got {}", self.cartel_size));
        }
        if self.cartel_size > self.companies {
            return fail(format!(
                "cartel of {} exceeds {} companies",
                self.cartel_size, self.companies
            ));
        }
        if !(self.shrink > 0.0 && self.shrink <= 1.0) {
            return fail(format!("shrink must be in (0, 1], got {}", self.shrink));
        }
        if !(0.0..=1.0).contains(&self.participation_rate) {
            return fail(format!(
                "participation_rate must be in [0, 1], got {}",
                self.participation_rate
            ));
        }
        if self.min_bidders < 2 || self.min_bidders > self.max_bidders {
            return fail(format!("bad bidder range {}..={}", self.min_bidders, self.max_bidders));
        }
        if self.max_bidders > self.companies {
            return fail(format!(
                "{} bidders exceed {} companies",
                self.max_bidders, self.companies
            ));
        }
        if !(self.bid_sd >= 0.0 && self.markup >= 0.0) || self.n_tenders == 0 || self.locations == 0 || self.sites == 0
        {
            return fail("n_tenders, locations and sites must be positive; bid_sd and markup non-negative".into());
        }
        Ok(())
    }

    /// Relations a generated table supports.
    pub fn relations(&self) -> Vec<RelationKind> {
        let mut r = vec![RelationKind::Tender, RelationKind::Competitor];
        if self.emit_locations {
            r.push(RelationKind::Location);
        }
        if self.emit_sites {
            r.push(RelationKind::Site);
        }
        r
    }
}

/// Tenders with a planted cartel. Rigged tenders have their spread
/// compressed by `shrink` and carry a markup. With `co_bidding` they are bid
/// only by cartel members and the designated winner rotates to the member
/// with the fewest wins. Cartel-member bids in rigged tenders are labeled
/// collusive.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<BidTable> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ids: Vec<usize> = (0..cfg.companies).collect();
    ids.shuffle(&mut rng);
    let cartel: Vec<usize> = ids[..cfg.cartel_size].to_vec();
    let mut in_cartel = vec![false; cfg.companies];
    for &c in &cartel {
        in_cartel[c] = true;
    }
    let mut wins = vec![0usize; cfg.companies];
    let value_dist = Normal::new(13.8f64, 0.6).expect("valid normal");
    let noise = Normal::new(0.0f64, cfg.bid_sd).expect("valid normal");

    let mut records = Vec::new();
    for t in 0..cfg.n_tenders {
        let rigged = rng.gen_bool(cfg.participation_rate);
        let k = rng.gen_range(cfg.min_bidders..=cfg.max_bidders);
        let value: f64 = value_dist.sample(&mut rng).exp();
        let location = rng.gen_range(0..cfg.locations);
        let site = rng.gen_range(0..cfg.sites);
        let mut offsets: Vec<f64> = (0..k).map(|_| noise.sample(&mut rng)).collect();
        let markup = if rigged {
            cfg.markup * rng.gen_range(0.5..1.5)
        } else {
            0.0
        };
        if rigged {
            let mean = offsets.iter().sum::<f64>() / k as f64;
            for o in &mut offsets {
                *o = mean + cfg.shrink * (*o - mean);
            }
        }
        let mut bids: Vec<f64> = offsets.iter().map(|o| value * (1.05 + markup + o).max(0.3)).collect();
        bids.sort_by(f64::total_cmp);

        let designated = rigged && cfg.co_bidding;
        let pool: &[usize] = if designated { &cartel } else { &ids };
        let k = k.min(pool.len());
        let mut bidders: Vec<usize> = pool.choose_multiple(&mut rng, k).copied().collect();
        if designated {
            // designated winner takes the lowest bid
            let w = (0..k).min_by_key(|&i| (wins[bidders[i]], bidders[i])).expect("k ≥ 2");
            bidders.swap(0, w);
            bidders[1..].shuffle(&mut rng);
        } else {
            bidders.shuffle(&mut rng);
        }
        wins[bidders[0]] += 1;

        for (i, (&c, &b)) in bidders.iter().zip(&bids).enumerate() {
            records.push(BidRecord {
                tender_id: format!("T{t:04}"),
                company_id: format!("C{c:03}"),
                location_id: cfg.emit_locations.then(|| format!("L{location:03}")),
                site_id: cfg.emit_sites.then(|| format!("S{site:03}")),
                bid_value: (b * 100.0).round() / 100.0,
                winner: i == 0,
                date: cfg.emit_dates.then_some(12_000.0 + t as f64),
                pte: Some((value * 100.0).round() / 100.0),
                label: rigged && in_cartel[c],
                supplied_screens: None,
            });
        }
    }
    BidTable::new(cfg.name.clone(), records)
}
