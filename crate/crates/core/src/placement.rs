//! Placement addresses: `core * 65536 + size`, with 0 meaning "inherit the
//! creator's placement" and 1 meaning "the creator's core, size 1".

use std::ops::Range;

use crate::value::Value;

pub const SIZE_RADIX: u64 = 65536;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementAddress {
    Inherit,
    Local,
    Explicit { core: u64, size: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResolvedPlacement {
    pub first_core: u32,
    pub size: u32,
    pub local_restricted: bool,
}

impl ResolvedPlacement {
    pub fn cores(&self) -> Range<u32> {
        self.first_core..self.first_core + self.size
    }

    pub fn encode(&self) -> u64 {
        encode(self.first_core as u64, self.size as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct PlacementError(pub String);

pub fn encode(core: u64, size: u64) -> u64 {
    core * SIZE_RADIX + size
}

/// Split an explicit address into (core, size).
pub fn decode(addr: u64) -> Result<(u64, u64), PlacementError> {
    let (core, size) = (addr / SIZE_RADIX, addr % SIZE_RADIX);
    if size == 0 {
        return Err(PlacementError(format!("placement address {} has size 0", addr)));
    }
    Ok((core, size))
}

impl PlacementAddress {
    /// Classify a runtime value. Plain integers 0 and 1 are the specials;
    /// `Value::Place` is always explicit.
    pub fn from_value(v: Value) -> Result<Self, PlacementError> {
        match v {
            Value::Place(a) => {
                let (core, size) = decode(a)?;
                Ok(PlacementAddress::Explicit { core, size })
            }
            Value::Int(0) => Ok(PlacementAddress::Inherit),
            Value::Int(1) => Ok(PlacementAddress::Local),
            Value::Int(a) if a > 1 => {
                let (core, size) = decode(a as u64)?;
                Ok(PlacementAddress::Explicit { core, size })
            }
            other => Err(PlacementError(format!("{} is not a placement address", other))),
        }
    }
}

/// Resolve `addr` relative to the creating thread.
pub fn resolve(
    addr: PlacementAddress,
    creator: ResolvedPlacement,
    creator_core: u32,
    num_cores: u32,
) -> Result<ResolvedPlacement, PlacementError> {
    match addr {
        PlacementAddress::Inherit => Ok(creator),
        PlacementAddress::Local => Ok(ResolvedPlacement {
            first_core: creator_core,
            size: 1,
            local_restricted: true,
        }),
        PlacementAddress::Explicit { core, size } => {
            if core >= num_cores as u64 {
                return Err(PlacementError(format!(
                    "placement starts at core {} but the machine has {} cores",
                    core, num_cores
                )));
            }
            let size = size.min(num_cores as u64 - core);
            Ok(ResolvedPlacement {
                first_core: core as u32,
                size: size as u32,
                local_restricted: false,
            })
        }
    }
}

/// Ordinal ranges per core offset for `n` threads over `p` cores.
/// Dependent families (with a shared channel) stay on the first core.
pub fn distribute(n: u64, p: u32, has_shared: bool) -> Vec<Range<u64>> {
    let p = p.max(1) as u64;
    if has_shared {
        return std::iter::once(0..n).chain((1..p).map(|_| n..n)).collect();
    }
    let (base, extra) = (n / p, n % p);
    let mut out = Vec::with_capacity(p as usize);
    let mut at = 0;
    for k in 0..p {
        let len = base + u64::from(k < extra);
        out.push(at..at + len);
        at += len;
    }
    out
}

/// Logical thread count for a half-open range; `step` must be positive.
pub fn thread_count(start: i64, limit: i64, step: i64) -> u64 {
    debug_assert!(step > 0);
    if limit <= start {
        return 0;
    }
    let span = (limit as i128 - start as i128) as u128;
    span.div_ceil(step as u128) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn placed(first_core: u32, size: u32, local_restricted: bool) -> ResolvedPlacement {
        ResolvedPlacement {
            first_core,
            size,
            local_restricted,
        }
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(encode(0, 4), 4);
        assert_eq!(encode(2, 1), 131073);
        assert_eq!(decode(encode(7, 2)).unwrap(), (7, 2));
        assert!(decode(65536).is_err());
    }

    #[test]
    fn inherit_and_local() {
        let cluster = placed(64, 16, false);
        assert_eq!(resolve(PlacementAddress::Inherit, cluster, 70, 128).unwrap(), cluster);
        assert_eq!(
            resolve(PlacementAddress::Local, cluster, 67, 128).unwrap(),
            placed(67, 1, true)
        );
        let local = placed(13, 1, true);
        assert_eq!(resolve(PlacementAddress::Inherit, local, 13, 128).unwrap(), local);
    }

    #[test]
    fn explicit_is_clamped_and_checked() {
        let boot = placed(0, 4, false);
        let a = PlacementAddress::Explicit { core: 2, size: 8 };
        assert_eq!(resolve(a, boot, 0, 4).unwrap(), placed(2, 2, false));
        let bad = PlacementAddress::Explicit { core: 4, size: 1 };
        assert!(resolve(bad, boot, 0, 4).is_err());
    }

    #[test]
    fn make_local_matches_special_one() {
        let creator = placed(0, 8, false);
        let made = PlacementAddress::from_value(Value::Place(encode(5, 1))).unwrap();
        let a = resolve(made, creator, 5, 8).unwrap();
        let b = resolve(PlacementAddress::Local, creator, 5, 8).unwrap();
        assert_eq!((a.first_core, a.size), (b.first_core, b.size));
    }

    #[test]
    fn specials_from_plain_integers() {
        assert_eq!(PlacementAddress::from_value(Value::Int(0)).unwrap(), PlacementAddress::Inherit);
        assert_eq!(PlacementAddress::from_value(Value::Int(1)).unwrap(), PlacementAddress::Local);
        assert_eq!(
            PlacementAddress::from_value(Value::Place(1)).unwrap(),
            PlacementAddress::Explicit { core: 0, size: 1 }
        );
    }

    #[test]
    fn distribution_examples() {
        assert_eq!(distribute(16, 4, false), vec![0..4, 4..8, 8..12, 12..16]);
        let d = distribute(100, 16, false);
        assert!(d.iter().all(|r| (6..=7).contains(&(r.end - r.start))));
        assert_eq!(d.iter().map(|r| r.end - r.start).sum::<u64>(), 100);
        assert_eq!(distribute(100, 16, true)[0], 0..100);
    }

    #[test]
    fn counts() {
        assert_eq!(thread_count(0, 10, 1), 10);
        assert_eq!(thread_count(0, 1, 1), 1);
        assert_eq!(thread_count(5, 5, 1), 0);
        assert_eq!(thread_count(0, 10, 3), 4);
        assert_eq!(thread_count(3, -2, 1), 0);
    }

    proptest! {
        #[test]
        fn encode_round_trip(core in 0u64..1 << 20, size in 1u64..SIZE_RADIX) {
            prop_assert_eq!(decode(encode(core, size)).unwrap(), (core, size));
        }

        #[test]
        fn distribution_covers_in_order(n in 0u64..500, p in 1u32..40, shared: bool) {
            let d = distribute(n, p, shared);
            prop_assert_eq!(d.len(), p as usize);
            let mut at = 0;
            for r in &d {
                prop_assert_eq!(r.start, at);
                at = r.end;
            }
            prop_assert_eq!(at, n);
            if !shared {
                let lens: Vec<u64> = d.iter().map(|r| r.end - r.start).collect();
                let max = *lens.iter().max().unwrap();
                let min = *lens.iter().min().unwrap();
                prop_assert!(max - min <= 1);
                prop_assert!(lens.windows(2).all(|w| w[0] >= w[1]));
            }
        }

        #[test]
        fn thread_count_matches_enumeration(start in -50i64..50, limit in -50i64..50, step in 1i64..7) {
            let listed = (0..).map(|k| start + k * step).take_while(|&i| i < limit).count() as u64;
            prop_assert_eq!(thread_count(start, limit, step), listed);
        }
    }
}
