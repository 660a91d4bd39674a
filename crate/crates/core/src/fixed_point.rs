//! Fixed-point integer encoding of real values.
//!
//! ASP solvers only do integer arithmetic, so thresholds, inputs and
//! confidences are written as `trunc(x * 10^digits)`. Truncation is applied
//! to the shortest decimal representation that round-trips to `x`, so
//! `0.29` encodes as `290000` rather than `289999`.

/// Default number of decimal digits kept by the encoding (scale 10^6).
pub const DEFAULT_DIGITS: u32 = 6;

/// Encodes `x` as `trunc(x * 10^digits)`, truncating toward zero.
///
/// Non-finite values and magnitudes beyond `i64` saturate.
pub fn encode(x: f64, digits: u32) -> i64 {
    if x.is_nan() {
        return 0;
    }
    if x.is_infinite() {
        return if x > 0.0 { i64::MAX } else { i64::MIN };
    }
    if x == 0.0 {
        return 0;
    }
    // `{:e}` yields the shortest round-trip form, e.g. "-3.7244028e-1".
    let repr = format!("{:e}", x.abs());
    let (mantissa, exponent) = repr.split_once('e').expect("exponent form");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits_str = format!("{int_part}{frac_part}");
    // value = 0.d1d2d3... * 10^(exponent + 1); scaled by 10^digits.
    let point = exponent + 1 + digits as i32;
    let magnitude: i128 = if point <= 0 {
        0
    } else if point as usize >= digits_str.len() {
        let mut v: i128 = digits_str.parse().unwrap_or(i128::MAX);
        for _ in 0..(point as usize - digits_str.len()) {
            v = v.saturating_mul(10);
        }
        v
    } else {
        digits_str[..point as usize].parse().unwrap_or(i128::MAX)
    };
    let signed = if x < 0.0 { -magnitude } else { magnitude };
    signed.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// Scale factor `10^digits` as a real.
pub fn scale(digits: u32) -> f64 {
    10f64.powi(digits as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_thresholds() {
        assert_eq!(encode(-0.37244028, 6), -372440);
        assert_eq!(encode(0.22323501, 6), 223235);
        assert_eq!(encode(0.74552625, 6), 745526);
    }

    #[test]
    fn truncates_toward_zero() {
        assert_eq!(encode(0.9999999, 6), 999999);
        assert_eq!(encode(-0.9999999, 6), -999999);
        assert_eq!(encode(-0.0000001, 6), 0);
        assert_eq!(encode(0.0, 6), 0);
        assert_eq!(encode(-0.0, 6), 0);
    }

    #[test]
    fn uses_decimal_representation() {
        assert_eq!(encode(0.29, 6), 290000);
        assert_eq!(encode(1.0, 6), 1_000_000);
        assert_eq!(encode(123.4567891, 6), 123_456_789);
        assert_eq!(encode(2.5e-3, 6), 2500);
        assert_eq!(encode(7.0, 0), 7);
        assert_eq!(encode(7.9, 0), 7);
    }

    #[test]
    fn saturates() {
        assert_eq!(encode(f64::INFINITY, 6), i64::MAX);
        assert_eq!(encode(f64::NEG_INFINITY, 6), i64::MIN);
        assert_eq!(encode(1e300, 6), i64::MAX);
        assert_eq!(encode(-1e300, 6), i64::MIN);
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_float_product_away_from_integers(x in -1000.0f64..1000.0) {
            let scaled = x * 1e6;
            let frac = (scaled - scaled.trunc()).abs();
            proptest::prop_assume!(frac > 1e-3 && frac < 1.0 - 1e-3);
            proptest::prop_assert_eq!(encode(x, 6), scaled.trunc() as i64);
        }
    }
}
