//! Orders, priority classes, delay-cost profiles and arrival streams.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Cell, GridMap, Zone};

/// Product weight range of the shipping dataset, kilograms.
pub const WEIGHT_RANGE_KG: (f64, f64) = (1.001, 7.846);
/// Product price range of the shipping dataset, dollars.
pub const PRICE_RANGE: (f64, f64) = (96.0, 310.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PriorityClass {
    A,
    B,
    C,
    D,
}

impl PriorityClass {
    pub const ALL: [PriorityClass; 4] = [
        PriorityClass::A,
        PriorityClass::B,
        PriorityClass::C,
        PriorityClass::D,
    ];

    /// Customer rating 1 is the most valuable customer; 4 and 5 the least.
    pub fn from_rating(rating: u8) -> Option<Self> {
        match rating {
            1 => Some(PriorityClass::A),
            2 => Some(PriorityClass::B),
            3 => Some(PriorityClass::C),
            4 | 5 => Some(PriorityClass::D),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['A', 'B', 'C', 'D'][self.index()]
    }
}

impl fmt::Display for PriorityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for PriorityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(PriorityClass::A),
            "B" | "b" => Ok(PriorityClass::B),
            "C" | "c" => Ok(PriorityClass::C),
            "D" | "d" => Ok(PriorityClass::D),
            other => Err(Error::InvalidParameter {
                field: "class",
                reason: format!("unknown priority class `{other}`"),
            }),
        }
    }
}

/// A pickup request. Times are absolute simulation seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: u32,
    pub pickup: Cell,
    pub arrival: f64,
    pub deadline: f64,
    pub weight_kg: f64,
    pub price: f64,
    pub class: PriorityClass,
}

impl Order {
    /// Deadline tolerance window, `deadline - arrival`.
    pub fn tolerance(&self) -> f64 {
        self.deadline - self.arrival
    }
}

/// Inter-arrival window in seconds; gaps are drawn uniformly from `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalWindow {
    pub lo: f64,
    pub hi: f64,
}

impl ArrivalWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "owt",
                reason: format!("need 0 <= lo <= hi, got [{lo}, {hi}]"),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

impl fmt::Display for ArrivalWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

/// Per-class deadline offsets, in hours, for classes A..D.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeadlineWindows {
    pub hours: [f64; 4],
}

impl DeadlineWindows {
    pub fn new(hours: [f64; 4]) -> Result<Self> {
        let [a, b, c, d] = hours;
        let ordered = hours.iter().all(|h| h.is_finite() && *h > 0.0) && a <= b && b <= c && b <= d;
        if !ordered {
            return Err(Error::DeadlineOrdering(hours));
        }
        Ok(Self { hours })
    }

    pub fn offset_secs(&self, class: PriorityClass) -> f64 {
        self.hours[class.index()] * 3600.0
    }
}

impl Default for DeadlineWindows {
    fn default() -> Self {
        Self {
            hours: [1.0, 2.0, 4.0, 4.0],
        }
    }
}

impl fmt::Display for DeadlineWindows {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.hours;
        write!(f, "({a},{b},{c},{d})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ProfileKind {
    Expedite,
    FixedDate,
    StandardUrgency,
    Intangible,
}

/// Whether the expedite curve ramps before the deadline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpediteAccrual {
    /// The ramp multiplies the delay past the deadline, which is zero
    /// beforehand, so the profile is a step to the cap at the deadline.
    #[default]
    AfterDeadline,
    /// The ramp multiplies the waiting time and meets the cap at the deadline.
    FromArrival,
}

/// Piecewise delay-cost curve of one priority class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayCostProfile {
    pub kind: ProfileKind,
    /// Linear rate (expedite, intangible) or exponent rate (standard urgency).
    pub lambda: f64,
    pub cap: f64,
    pub deadline_offset: f64,
    pub saturation: f64,
    pub accrual: ExpediteAccrual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    /// Caps C_A..C_D in dollars per order.
    pub caps: [f64; 4],
    /// Saturation time as a multiple of the deadline offset.
    pub saturation_factor: f64,
    pub expedite_accrual: ExpediteAccrual,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            caps: [2.0, 1.5, 1.0, 0.5],
            saturation_factor: 2.0,
            expedite_accrual: ExpediteAccrual::AfterDeadline,
        }
    }
}

impl ProfileParams {
    pub fn validate(&self) -> Result<()> {
        let [a, b, c, d] = self.caps;
        if !(self.caps.iter().all(|x| x.is_finite() && *x >= 0.0) && a >= b && b >= c && c >= d) {
            return Err(Error::CapOrdering(self.caps));
        }
        if !(self.saturation_factor > 1.0) {
            return Err(Error::InvalidParameter {
                field: "saturation_factor",
                reason: format!("must exceed 1, got {}", self.saturation_factor),
            });
        }
        Ok(())
    }
}

/// Builds the delay-cost profile of `class`: A expedite, B fixed date,
/// C standard urgency, D intangible.
pub fn delay_profile_for(
    class: PriorityClass,
    params: &ProfileParams,
    dtw: &DeadlineWindows,
) -> Result<DelayCostProfile> {
    params.validate()?;
    let cap = params.caps[class.index()];
    let deadline_offset = dtw.offset_secs(class);
    let saturation = params.saturation_factor * deadline_offset;
    let span = saturation - deadline_offset;
    let (kind, lambda) = match class {
        PriorityClass::A => (ProfileKind::Expedite, cap / deadline_offset),
        PriorityClass::B => (ProfileKind::FixedDate, 0.0),
        // exp(lambda * delay) starts at 1 and must not fall, so caps at or
        // below one flatten the ramp.
        PriorityClass::C => (ProfileKind::StandardUrgency, (cap.ln() / span).max(0.0)),
        PriorityClass::D => (ProfileKind::Intangible, cap / span),
    };
    Ok(DelayCostProfile {
        kind,
        lambda,
        cap,
        deadline_offset,
        saturation,
        accrual: params.expedite_accrual,
    })
}

/// Profiles for all four classes, indexed by class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProfiles([DelayCostProfile; 4]);

impl ClassProfiles {
    pub fn new(params: &ProfileParams, dtw: &DeadlineWindows) -> Result<Self> {
        Ok(Self([
            delay_profile_for(PriorityClass::A, params, dtw)?,
            delay_profile_for(PriorityClass::B, params, dtw)?,
            delay_profile_for(PriorityClass::C, params, dtw)?,
            delay_profile_for(PriorityClass::D, params, dtw)?,
        ]))
    }

    pub fn get(&self, class: PriorityClass) -> &DelayCostProfile {
        &self.0[class.index()]
    }
}

/// Class proportions for A..D.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMix(pub [f64; 4]);

impl Default for ClassMix {
    /// Ratings are spread roughly evenly over 1..=5 in the shipping data,
    /// and ratings 4 and 5 both map to class D.
    fn default() -> Self {
        Self([0.2, 0.2, 0.2, 0.4])
    }
}

/// Storage-zone proportions for A..F.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneMix(pub [f64; 6]);

impl Default for ZoneMix {
    /// Zone F carries a third of the demand; the others share the rest.
    fn default() -> Self {
        let rest = (2.0 / 3.0) / 5.0;
        Self([rest, rest, rest, rest, rest, 1.0 / 3.0])
    }
}

fn check_proportions(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProportions { sum });
    }
    Ok(())
}

/// A time-sorted order sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStream {
    pub orders: Vec<Order>,
    pub owt: ArrivalWindow,
    pub horizon: f64,
}

impl OrderStream {
    pub fn new(mut orders: Vec<Order>, owt: ArrivalWindow) -> Self {
        orders.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)));
        let horizon = orders.last().map_or(0.0, |o| o.arrival);
        Self {
            orders,
            owt,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn total_value(&self) -> f64 {
        self.orders.iter().map(|o| o.price).sum()
    }

    /// Arrival times are nondecreasing and all lie within the horizon.
    pub fn is_consistent(&self) -> bool {
        self.orders.windows(2).all(|w| w[0].arrival <= w[1].arrival)
            && self
                .orders
                .iter()
                .all(|o| o.arrival <= self.horizon && o.deadline > o.arrival)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisParams {
    pub class_mix: ClassMix,
    pub zone_mix: ZoneMix,
}

/// Draws `n` synthetic orders with dataset-range weights and prices.
pub fn synthesize_stream(
    n: usize,
    map: &GridMap,
    params: &SynthesisParams,
    owt: ArrivalWindow,
    dtw: &DeadlineWindows,
    seed: u64,
) -> Result<OrderStream> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            field: "orders",
            reason: "need at least one order".into(),
        });
    }
    check_proportions(&params.class_mix.0)?;
    check_proportions(&params.zone_mix.0)?;

    // Zones absent from the map get no weight.
    let zone_weights: Vec<f64> = Zone::ALL
        .iter()
        .map(|z| {
            if map.zone_cells(*z).is_empty() {
                0.0
            } else {
                params.zone_mix.0[z.index()]
            }
        })
        .collect();
    let zone_dist = WeightedIndex::new(&zone_weights).map_err(|e| Error::InvalidParameter {
        field: "zone_mix",
        reason: e.to_string(),
    })?;
    let class_dist =
        WeightedIndex::new(params.class_mix.0).map_err(|_| Error::InvalidProportions {
            sum: params.class_mix.0.iter().sum(),
        })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    let mut orders = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            t += owt.draw(&mut rng);
        }
        let class = PriorityClass::ALL[class_dist.sample(&mut rng)];
        let zone = Zone::ALL[zone_dist.sample(&mut rng)];
        let pickup = map.sample_in_zone(zone, &mut rng)?;
        let weight_kg = rng.gen_range(WEIGHT_RANGE_KG.0..=WEIGHT_RANGE_KG.1);
        let price = rng.gen_range(PRICE_RANGE.0 as u32..=PRICE_RANGE.1 as u32) as f64;
        orders.push(Order {
            id: i as u32 + 1,
            pickup,
            arrival: t,
            deadline: t + dtw.offset_secs(class),
            weight_kg,
            price,
            class,
        });
    }
    Ok(OrderStream::new(orders, owt))
}

/// A dataset value outside the documented range; reported, not fatal.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeWarning {
    pub row: usize,
    pub field: &'static str,
    pub value: f64,
}

impl fmt::Display for RangeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "row {}: {} = {} outside dataset range",
            self.row, self.field, self.value
        )
    }
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub stream: OrderStream,
    pub warnings: Vec<RangeWarning>,
}

fn normalize_header(h: &str) -> String {
    h.trim()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

fn find_column(headers: &csv::StringRecord, names: &[&str], label: &'static str) -> Result<usize> {
    headers
        .iter()
        .position(|h| names.contains(&normalize_header(h).as_str()))
        .ok_or(Error::MissingColumn(label))
}

/// Reads shipping records (ID, warehouse block, customer rating, price,
/// weight in grams). Headers match case-insensitively, ignoring spaces and
/// underscores; the original Kaggle column names are accepted too.
pub fn ingest_reader<R: Read>(
    reader: R,
    map: &GridMap,
    owt: ArrivalWindow,
    dtw: &DeadlineWindows,
    seed: u64,
) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = find_column(&headers, &["id"], "ID")?;
    let block_col = find_column(&headers, &["warehouseblock"], "Warehouse block")?;
    let rating_col = find_column(&headers, &["customerrating"], "Customer rating")?;
    let price_col = find_column(
        &headers,
        &["priceoftheproduct", "costoftheproduct"],
        "Price of the product",
    )?;
    let weight_col = find_column(
        &headers,
        &["weightoftheproduct", "weightingms"],
        "Weight of the product",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut orders = Vec::new();
    let mut t = 0.0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2; // header is row 1
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let num = |col: usize, name: &str| -> Result<f64> {
            field(col).parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("{name}: `{}` is not a number", field(col)),
            })
        };
        let id = field(id_col).parse::<u32>().map_err(|_| Error::Parse {
            row,
            message: format!("ID: `{}` is not a positive integer", field(id_col)),
        })?;
        let rating = num(rating_col, "Customer rating")?;
        let class = PriorityClass::from_rating(rating as u8)
            .filter(|_| rating.fract() == 0.0)
            .ok_or_else(|| Error::Parse {
                row,
                message: format!("Customer rating `{rating}` outside 1..=5"),
            })?;
        let zone: Zone = field(block_col).parse().map_err(|_| Error::Parse {
            row,
            message: format!("unknown warehouse block `{}`", field(block_col)),
        })?;
        let price = num(price_col, "Price")?;
        let weight_kg = num(weight_col, "Weight")? / 1000.0;
        if !(PRICE_RANGE.0..=PRICE_RANGE.1).contains(&price) {
            warnings.push(RangeWarning {
                row,
                field: "price",
                value: price,
            });
        }
        if !(WEIGHT_RANGE_KG.0..=WEIGHT_RANGE_KG.1).contains(&weight_kg) {
            warnings.push(RangeWarning {
                row,
                field: "weight_kg",
                value: weight_kg,
            });
        }
        if !orders.is_empty() {
            t += owt.draw(&mut rng);
        }
        let pickup = map.sample_in_zone(zone, &mut rng)?;
        orders.push(Order {
            id,
            pickup,
            arrival: t,
            deadline: t + dtw.offset_secs(class),
            weight_kg,
            price,
            class,
        });
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Ingested {
        stream: OrderStream::new(orders, owt),
        warnings,
    })
}

pub fn ingest_csv(
    path: &Path,
    map: &GridMap,
    owt: ArrivalWindow,
    dtw: &DeadlineWindows,
    seed: u64,
) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, map, owt, dtw, seed)
}

#[derive(Serialize, Deserialize)]
struct StreamRow {
    id: u32,
    x: i32,
    y: i32,
    t_o: f64,
    t_dd: f64,
    weight_kg: f64,
    price: f64,
    class: PriorityClass,
}

/// Writes the stream dump (`id,x,y,t_o,t_dd,weight_kg,price,class`).
pub fn write_stream_csv<W: Write>(writer: W, stream: &OrderStream) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in &stream.orders {
        w.serialize(StreamRow {
            id: o.id,
            x: o.pickup.x,
            y: o.pickup.y,
            t_o: o.arrival,
            t_dd: o.deadline,
            weight_kg: o.weight_kg,
            price: o.price,
            class: o.class,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream_csv<R: Read>(reader: R, owt: ArrivalWindow) -> Result<OrderStream> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut orders = Vec::new();
    for (i, row) in rdr.deserialize::<StreamRow>().enumerate() {
        let r = row.map_err(|e| Error::Parse {
            row: i + 2,
            message: e.to_string(),
        })?;
        orders.push(Order {
            id: r.id,
            pickup: Cell::new(r.x, r.y),
            arrival: r.t_o,
            deadline: r.t_dd,
            weight_kg: r.weight_kg,
            price: r.price,
            class: r.class,
        });
    }
    Ok(OrderStream::new(orders, owt))
}
