//! Resource reservation for ad hoc services: the effective Poisson arrival
//! rate per collision domain, the reliability achieved by a reservation of R
//! resource blocks, the smallest reservation meeting a target, a Monte Carlo
//! cross-check, and sweep tables over (l, density, target) grids.

use thiserror::Error;

/// Rate/geometry inputs for one reservation question.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservationQuery {
    pub vehicle_density_per_m: f64,
    pub doca_length_m: f64,
    pub interference_range_m: f64,
    pub adhoc_rate_per_vehicle_per_m: f64,
    pub target_reliability: f64,
}

/// Resolved reservation: the effective arrival rate, the minimum reservation
/// and the reliability it actually achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservationResult {
    pub lambda: f64,
    pub required_rb: u32,
    pub achieved_reliability: f64,
}

/// Monte Carlo reliability estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub reliability: f64,
    pub std_error: f64,
}

/// One row of a reservation sweep table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub doca_length_m: f64,
    pub vehicle_density_per_m: f64,
    pub target_reliability: f64,
    pub lambda: f64,
    pub required_rb: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReservationError {
    #[error("invalid reservation input `{key}`: {reason}")]
    InvalidInput { key: &'static str, reason: String },
    #[error("sweep axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("reservation of {required_rb} RBs exceeds the cell capacity of {capacity} RBs")]
    CapacityExceeded { required_rb: u32, capacity: u32 },
}

/// Effective arrival rate of ad hoc services within one collision domain.
///
/// The domain spans min(2d, l): a DOCA no longer than 2d is a single
/// collision domain, while a longer one saturates at 2d because services
/// further apart can reuse the same resource block.
pub fn adhoc_rate(
    vehicle_density_per_m: f64,
    interference_range_m: f64,
    doca_length_m: f64,
    adhoc_rate_per_vehicle_per_m: f64,
) -> f64 {
    vehicle_density_per_m
        * doca_length_m.min(2.0 * interference_range_m)
        * adhoc_rate_per_vehicle_per_m
}

/// Two-direction vehicle density implied by an arrival rate and a mean
/// speed. Reported for convenience only; reservation math always takes the
/// density as a direct input.
pub fn effective_density(vehicle_arrival_rate_per_s: f64, mean_speed_mps: f64) -> f64 {
    vehicle_arrival_rate_per_s / mean_speed_mps
}

/// Reliability of ad hoc services with `reserved_rb` reserved blocks under
/// Poisson(`lambda`) arrivals: the probability that arrivals do not exceed
/// the reservation, e^-lambda * sum_{k<R} lambda^k / k!.
///
/// Terms accumulate through the recurrence term_k = term_{k-1} * lambda / k
/// so no factorial is ever materialized; rates above `LOG_SPACE_THRESHOLD`
/// switch to log-space accumulation to dodge e^-lambda underflow.
pub fn reliability(reserved_rb: u32, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if reserved_rb == 0 {
        return 0.0;
    }
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda > LOG_SPACE_THRESHOLD {
        return reliability_log_space(reserved_rb, lambda);
    }
    let mut term = (-lambda).exp();
    let mut acc = term;
    for k in 1..reserved_rb {
        term *= lambda / k as f64;
        acc += term;
    }
    // Probability: near saturation the sum may round an ulp above one.
    acc.min(1.0)
}

const LOG_SPACE_THRESHOLD: f64 = 700.0;

fn reliability_log_space(reserved_rb: u32, lambda: f64) -> f64 {
    let ln_lambda = lambda.ln();
    let mut ln_term = 0.0f64;
    let mut lse = 0.0f64;
    for k in 1..reserved_rb {
        ln_term += ln_lambda - (k as f64).ln();
        let m = lse.max(ln_term);
        lse = m + ((lse - m).exp() + (ln_term - m).exp()).ln();
    }
    (lse - lambda).exp().min(1.0)
}

/// Smallest reservation R with reliability(R, lambda) >= target. The Poisson
/// CDF is strictly increasing in R for lambda > 0, so the first hit found by
/// counting up from zero is minimal.
pub fn required_reservation(lambda: f64, target_reliability: f64) -> u32 {
    assert!(
        target_reliability > 0.0 && target_reliability < 1.0,
        "target reliability must lie in (0, 1), got {target_reliability}"
    );
    if lambda <= 0.0 {
        return 1;
    }
    if lambda > LOG_SPACE_THRESHOLD {
        let mut r = 1;
        while reliability_log_space(r, lambda) < target_reliability {
            r += 1;
        }
        return r;
    }
    let mut term = (-lambda).exp();
    let mut acc = term;
    let mut r = 1;
    while acc < target_reliability {
        term *= lambda / r as f64;
        acc += term;
        r += 1;
    }
    r
}

/// Overload indicator: more ad hoc services active than reserved blocks.
pub fn overload(reserved_rb: u32, active_services: u32) -> bool {
    reserved_rb < active_services
}

/// Overload check that also enforces the reservation to stay below the cell
/// capacity N.
pub fn overload_checked(
    reserved_rb: u32,
    active_services: u32,
    cell_capacity_rb: u32,
) -> Result<bool, ReservationError> {
    if reserved_rb >= cell_capacity_rb {
        return Err(ReservationError::CapacityExceeded {
            required_rb: reserved_rb,
            capacity: cell_capacity_rb,
        });
    }
    Ok(overload(reserved_rb, active_services))
}

/// Validate and solve one reservation query.
pub fn solve(query: &ReservationQuery) -> Result<ReservationResult, ReservationError> {
    validate_query(query)?;
    let lambda = adhoc_rate(
        query.vehicle_density_per_m,
        query.interference_range_m,
        query.doca_length_m,
        query.adhoc_rate_per_vehicle_per_m,
    );
    let required_rb = required_reservation(lambda, query.target_reliability);
    Ok(ReservationResult { lambda, required_rb, achieved_reliability: reliability(required_rb, lambda) })
}

fn validate_query(query: &ReservationQuery) -> Result<(), ReservationError> {
    let invalid = |key, reason: String| Err(ReservationError::InvalidInput { key, reason });
    if !(query.vehicle_density_per_m >= 0.0 && query.vehicle_density_per_m.is_finite()) {
        return invalid("vehicle_density_per_m", format!("must be >= 0, got {}", query.vehicle_density_per_m));
    }
    if !(query.doca_length_m > 0.0) {
        return invalid("doca_length_m", format!("must be > 0, got {}", query.doca_length_m));
    }
    if !(query.interference_range_m > 0.0) {
        return invalid("interference_range_m", format!("must be > 0, got {}", query.interference_range_m));
    }
    if !(query.adhoc_rate_per_vehicle_per_m >= 0.0) {
        return invalid(
            "adhoc_rate_per_vehicle_per_m",
            format!("must be >= 0, got {}", query.adhoc_rate_per_vehicle_per_m),
        );
    }
    if !(query.target_reliability > 0.0 && query.target_reliability < 1.0) {
        return invalid(
            "target_reliability",
            format!("must lie in (0, 1), got {}", query.target_reliability),
        );
    }
    Ok(())
}

/// Empirical reliability from `trials` Poisson draws: the fraction of trials
/// whose arrival count stays below the reservation. Deterministic for a
/// fixed seed; draws come from a counter-based generator so trials are
/// independent of call order.
pub fn monte_carlo_reliability(
    reserved_rb: u32,
    lambda: f64,
    trials: u64,
    seed: u64,
) -> MonteCarloEstimate {
    assert!(trials >= 1, "at least one trial required");
    let mut hits = 0u64;
    for trial in 0..trials {
        let u = unit_uniform(seed, trial);
        if poisson_inverse(lambda, u) < reserved_rb as u64 {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    MonteCarloEstimate { reliability: p, std_error: (p * (1.0 - p) / trials as f64).sqrt() }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) from a (seed, counter) pair.
fn unit_uniform(seed: u64, counter: u64) -> f64 {
    let bits = splitmix64(splitmix64(seed) ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Poisson sample by CDF inversion using the same term recurrence as
/// `reliability`.
fn poisson_inverse(lambda: f64, u: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let cap = 1_000 + (20.0 * lambda) as u64;
    let mut term = (-lambda).exp();
    let mut cdf = term;
    let mut k = 0u64;
    while u >= cdf && k < cap {
        k += 1;
        term *= lambda / k as f64;
        cdf += term;
    }
    k
}

/// Required reservation over the cartesian grid of DOCA lengths, densities
/// and targets, at fixed interference range and per-vehicle rate. Rows come
/// out in lexicographic input order (length, density, target).
pub fn reservation_sweep(
    doca_lengths_m: &[f64],
    densities_per_m: &[f64],
    target_reliabilities: &[f64],
    interference_range_m: f64,
    adhoc_rate_per_vehicle_per_m: f64,
) -> Result<Vec<SweepRow>, ReservationError> {
    if doca_lengths_m.is_empty() {
        return Err(ReservationError::EmptyAxis("doca_length_m"));
    }
    if densities_per_m.is_empty() {
        return Err(ReservationError::EmptyAxis("vehicle_density_per_m"));
    }
    if target_reliabilities.is_empty() {
        return Err(ReservationError::EmptyAxis("target_reliability"));
    }
    let mut rows = Vec::with_capacity(
        doca_lengths_m.len() * densities_per_m.len() * target_reliabilities.len(),
    );
    for &l in doca_lengths_m {
        for &density in densities_per_m {
            for &target in target_reliabilities {
                let result = solve(&ReservationQuery {
                    vehicle_density_per_m: density,
                    doca_length_m: l,
                    interference_range_m,
                    adhoc_rate_per_vehicle_per_m,
                    target_reliability: target,
                })?;
                rows.push(SweepRow {
                    doca_length_m: l,
                    vehicle_density_per_m: density,
                    target_reliability: target,
                    lambda: result.lambda,
                    required_rb: result.required_rb,
                });
            }
        }
    }
    Ok(rows)
}
