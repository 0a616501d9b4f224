//! Trip tables, OD pair sets and origin/destination totals.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Sparse origin-destination trip table as read from a trips file (0-based zones).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripTable {
    pub zone_count: usize,
    pub entries: BTreeMap<(usize, usize), f64>,
    /// Value of the `<TOTAL OD FLOW>` header, when present.
    pub declared_total: Option<f64>,
}

impl TripTable {
    pub fn new(zone_count: usize) -> Self {
        TripTable {
            zone_count,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, origin: usize, destination: usize, trips: f64) {
        if trips > 0.0 {
            *self.entries.entry((origin, destination)).or_insert(0.0) += trips;
        }
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OdPair {
    /// Index into the origin list.
    pub origin: usize,
    /// Index into the destination list.
    pub destination: usize,
}

/// The OD pair set together with per-origin and per-destination adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub origin_count: usize,
    pub destination_count: usize,
    pub pairs: Vec<OdPair>,
    by_origin: Vec<Vec<usize>>,
    by_destination: Vec<Vec<usize>>,
}

impl PairSet {
    pub fn new(
        origin_count: usize,
        destination_count: usize,
        mut pairs: Vec<OdPair>,
    ) -> Result<Self> {
        pairs.sort();
        pairs.dedup();
        let mut by_origin = vec![Vec::new(); origin_count];
        let mut by_destination = vec![Vec::new(); destination_count];
        for (k, p) in pairs.iter().enumerate() {
            if p.origin >= origin_count || p.destination >= destination_count {
                return Err(Error::Invalid(format!("pair {p:?} out of range")));
            }
            by_origin[p.origin].push(k);
            by_destination[p.destination].push(k);
        }
        if pairs.is_empty() {
            return Err(Error::NoDemand);
        }
        if let Some(i) = by_origin.iter().position(Vec::is_empty) {
            return Err(Error::Invalid(format!("origin #{i} has no OD pair")));
        }
        if let Some(j) = by_destination.iter().position(Vec::is_empty) {
            return Err(Error::Invalid(format!("destination #{j} has no OD pair")));
        }
        Ok(PairSet {
            origin_count,
            destination_count,
            pairs,
            by_origin,
            by_destination,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pair indices leaving origin `i`.
    pub fn from_origin(&self, i: usize) -> &[usize] {
        &self.by_origin[i]
    }

    /// Pair indices arriving at destination `j`.
    pub fn to_destination(&self, j: usize) -> &[usize] {
        &self.by_destination[j]
    }

    pub fn row_sums(&self, values: &[f64]) -> Vec<f64> {
        self.by_origin
            .iter()
            .map(|ks| ks.iter().map(|&k| values[k]).sum())
            .collect()
    }

    pub fn column_sums(&self, values: &[f64]) -> Vec<f64> {
        self.by_destination
            .iter()
            .map(|ks| ks.iter().map(|&k| values[k]).sum())
            .collect()
    }
}

/// Trip-generation side of the model: which zones send and receive trips,
/// their totals, and the pair set over which demand is distributed.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSpec {
    /// Origin node ids (0-based).
    pub origins: Vec<usize>,
    /// Destination node ids (0-based).
    pub destinations: Vec<usize>,
    pub pairs: PairSet,
    /// Trips produced per origin, vehicle units.
    pub origin_totals: Vec<f64>,
    /// Trips attracted per destination, vehicle units.
    pub destination_totals: Vec<f64>,
    /// Total demand; equals the sum of both total vectors.
    pub total: f64,
    /// Observed trips per pair, when the spec came from a trip table.
    pub reference: Option<Vec<f64>>,
}

impl DemandSpec {
    /// Pair set is every (origin, destination) with distinct nodes.
    pub fn new(
        origins: Vec<usize>,
        destinations: Vec<usize>,
        origin_totals: Vec<f64>,
        destination_totals: Vec<f64>,
    ) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, &o) in origins.iter().enumerate() {
            for (j, &d) in destinations.iter().enumerate() {
                if o != d {
                    pairs.push(OdPair {
                        origin: i,
                        destination: j,
                    });
                }
            }
        }
        Self::with_pairs(
            origins,
            destinations,
            pairs,
            origin_totals,
            destination_totals,
        )
    }

    pub fn with_pairs(
        origins: Vec<usize>,
        destinations: Vec<usize>,
        pairs: Vec<OdPair>,
        origin_totals: Vec<f64>,
        destination_totals: Vec<f64>,
    ) -> Result<Self> {
        if origins.len() != origin_totals.len() || destinations.len() != destination_totals.len() {
            return Err(Error::Invalid("totals do not match zone lists".into()));
        }
        if origin_totals
            .iter()
            .chain(&destination_totals)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Invalid("zone totals must be finite and >= 0".into()));
        }
        let total: f64 = origin_totals.iter().sum();
        let attracted: f64 = destination_totals.iter().sum();
        if total <= 0.0 {
            return Err(Error::NoDemand);
        }
        if (total - attracted).abs() > 1e-9 * total {
            return Err(Error::Invalid(format!(
                "origin totals sum to {total} but destination totals sum to {attracted}"
            )));
        }
        let pairs = PairSet::new(origins.len(), destinations.len(), pairs)?;
        Ok(DemandSpec {
            origins,
            destinations,
            pairs,
            origin_totals,
            destination_totals,
            total,
            reference: None,
        })
    }

    pub fn pair_nodes(&self, k: usize) -> (usize, usize) {
        let p = self.pairs.pairs[k];
        (self.origins[p.origin], self.destinations[p.destination])
    }

    /// Looks up the pair index for a pair of node ids.
    pub fn pair_index(&self, origin_node: usize, destination_node: usize) -> Option<usize> {
        let i = self.origins.iter().position(|&o| o == origin_node)?;
        let j = self
            .destinations
            .iter()
            .position(|&d| d == destination_node)?;
        self.pairs
            .from_origin(i)
            .iter()
            .copied()
            .find(|&k| self.pairs.pairs[k].destination == j)
    }

    /// Builds the spec from an observed trip table: origins and destinations
    /// are the zones with positive production and attraction, and the pair
    /// set covers all distinct origin/destination combinations.
    ///
    /// Intrazonal trips count towards the zone totals but have no pair of
    /// their own, so the model redistributes them over interzonal pairs.
    pub fn from_trips(trips: &TripTable) -> Result<Self> {
        let mut produced: BTreeMap<usize, f64> = BTreeMap::new();
        let mut attracted: BTreeMap<usize, f64> = BTreeMap::new();
        for (&(o, d), &v) in &trips.entries {
            *produced.entry(o).or_insert(0.0) += v;
            *attracted.entry(d).or_insert(0.0) += v;
        }
        if trips.entries.keys().any(|(o, d)| o == d) {
            log::warn!("trip table has intrazonal entries; they are spread over interzonal pairs");
        }
        if produced.is_empty() {
            return Err(Error::NoDemand);
        }
        let origins: Vec<usize> = produced.keys().copied().collect();
        let destinations: Vec<usize> = attracted.keys().copied().collect();
        let mut spec = DemandSpec::new(
            origins,
            destinations,
            produced.values().copied().collect(),
            attracted.values().copied().collect(),
        )?;
        // Single summation order for both marginals keeps the totals identical.
        spec.total = spec.origin_totals.iter().sum();
        let reference = (0..spec.pairs.len())
            .map(|k| {
                let (o, d) = spec.pair_nodes(k);
                trips.entries.get(&(o, d)).copied().unwrap_or(0.0)
            })
            .collect();
        spec.reference = Some(reference);
        Ok(spec)
    }
}

/// Row and column sums of a trip table, as a demand specification.
pub fn marginals(trips: &TripTable) -> Result<DemandSpec> {
    DemandSpec::from_trips(trips)
}
