//! Small exact-arithmetic helpers shared by the other modules: gcd/lcm on
//! `u32`/`u64`, modular inverses, unit groups of `Z/d`, and additive orders.

use num_integer::Integer;

/// Greatest common divisor on `u64`, with the convention `gcd(0, 0) = 0`.
pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Least common multiple on `u64`, with `lcm(0, x) = 0`.
pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

/// `gcd` specialised to `u32` residues.
pub fn gcd32(a: u32, b: u32) -> u32 {
    a.gcd(&b)
}

/// The inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
///
/// Computed by the extended Euclidean algorithm; the result lies in `0..m`.
/// Returns `None` when `a` is not a unit mod `m` (including `m = 0`).
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 0 {
        return None;
    }
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// The units of `Z/d` in increasing order, i.e. residues `u` with
/// `gcd(u, d) = 1`. For `d = 1` this is `[0]` (the trivial group).
pub fn units(d: u32) -> Vec<u32> {
    if d == 1 {
        return vec![0];
    }
    (1..d).filter(|&u| gcd32(u, d) == 1).collect()
}

/// The order of the residue `x` in the additive group `Z/m`,
/// namely `m / gcd(x, m)`. Requires `m >= 1`.
pub fn additive_order(x: u32, m: u32) -> u32 {
    assert!(m >= 1, "additive_order requires a nontrivial modulus");
    m / gcd32(x % m, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        for m in 1u64..60 {
            for a in 0..m {
                match inv_mod(a, m) {
                    Some(b) => {
                        assert_eq!(gcd(a, m), 1);
                        assert_eq!(a * b % m, 1 % m);
                        assert!(b < m);
                    }
                    None => assert_ne!(gcd(a, m), 1),
                }
            }
        }
    }

    #[test]
    fn units_are_closed_under_product() {
        for d in 2u32..40 {
            let us = units(d);
            assert_eq!(
                us.len() as u32,
                (1..=d).filter(|&u| gcd32(u, d) == 1).count() as u32
            );
            for &a in &us {
                for &b in &us {
                    assert!(us.binary_search(&((a * b) % d)).is_ok());
                }
            }
        }
    }

    #[test]
    fn additive_orders() {
        assert_eq!(additive_order(0, 12), 1);
        assert_eq!(additive_order(4, 12), 3);
        assert_eq!(additive_order(5, 12), 12);
        assert_eq!(additive_order(6, 12), 2);
    }
}
