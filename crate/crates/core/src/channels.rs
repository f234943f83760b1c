//! Global (broadcast) and shared (daisy-chained) channels built from
//! single-assignment cells.

use crate::frontend::ast::{Direction, ValueClass};
use crate::ir::Coerce;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Empty,
    Full(Value),
    /// Link left unwritten by its thread; passes the incoming value on.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChannelError {
    #[error("channel {chan} written twice{}", at.map(|k| format!(" by thread ordinal {}", k)).unwrap_or_default())]
    DoubleWrite { chan: u32, at: Option<u64> },
    #[error("write to global channel {chan}")]
    WriteGlobal { chan: u32 },
}

#[derive(Debug, Clone)]
pub enum Channel {
    Global {
        class: ValueClass,
        cell: Cell,
    },
    Shared {
        class: ValueClass,
        source: Cell,
        /// One outgoing link per ordinal, in index order.
        links: Vec<Cell>,
    },
}

impl Channel {
    pub fn new(direction: Direction, class: ValueClass, threads: u64) -> Self {
        match direction {
            Direction::Global => Channel::Global {
                class,
                cell: Cell::Empty,
            },
            Direction::Shared => Channel::Shared {
                class,
                source: Cell::Empty,
                links: vec![Cell::Empty; threads as usize],
            },
        }
    }

    pub fn class(&self) -> ValueClass {
        match self {
            Channel::Global { class, .. } | Channel::Shared { class, .. } => *class,
        }
    }

    /// Creator-side source value.
    pub fn put(&mut self, chan: u32, v: Value) -> Result<(), ChannelError> {
        let v = v.coerce(Coerce::for_class(self.class()));
        let cell = match self {
            Channel::Global { cell, .. } => cell,
            Channel::Shared { source, .. } => source,
        };
        if *cell != Cell::Empty {
            return Err(ChannelError::DoubleWrite { chan, at: None });
        }
        *cell = Cell::Full(v);
        Ok(())
    }

    /// Value visible to thread `ordinal`, or `None` if it must block.
    pub fn read(&self, ordinal: u64) -> Option<Value> {
        match self {
            Channel::Global { cell, .. } => full(*cell),
            Channel::Shared { source, links, .. } => incoming(*source, links, ordinal),
        }
    }

    pub fn write(&mut self, chan: u32, ordinal: u64, v: Value) -> Result<(), ChannelError> {
        let v = v.coerce(Coerce::for_class(self.class()));
        match self {
            Channel::Global { .. } => Err(ChannelError::WriteGlobal { chan }),
            Channel::Shared { links, .. } => {
                let cell = &mut links[ordinal as usize];
                if *cell != Cell::Empty {
                    return Err(ChannelError::DoubleWrite {
                        chan,
                        at: Some(ordinal),
                    });
                }
                *cell = Cell::Full(v);
                Ok(())
            }
        }
    }

    /// Whether thread `ordinal` still owes a write on this channel.
    pub fn unwritten(&self, ordinal: u64) -> bool {
        match self {
            Channel::Global { .. } => false,
            Channel::Shared { links, .. } => links[ordinal as usize] == Cell::Empty,
        }
    }

    pub fn forward(&mut self, ordinal: u64) {
        if let Channel::Shared { links, .. } = self {
            links[ordinal as usize] = Cell::Forward;
        }
    }

    /// Creator-side value after the family terminated: the final link of a
    /// shared chain, or the source of a global channel.
    pub fn get(&self) -> Option<Value> {
        match self {
            Channel::Global { cell, .. } => full(*cell),
            Channel::Shared { source, links, .. } => incoming(*source, links, links.len() as u64),
        }
    }
}

fn full(c: Cell) -> Option<Value> {
    match c {
        Cell::Full(v) => Some(v),
        _ => None,
    }
}

/// Input of link `ordinal`: the source for ordinal 0, else link k-1,
/// following forwarded links back toward the source.
fn incoming(source: Cell, links: &[Cell], ordinal: u64) -> Option<Value> {
    let mut k = ordinal as usize;
    while k > 0 {
        match links[k - 1] {
            Cell::Full(v) => return Some(v),
            Cell::Empty => return None,
            Cell::Forward => k -= 1,
        }
    }
    full(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int_chain(n: u64) -> Channel {
        Channel::new(Direction::Shared, ValueClass::IntegerScalar, n)
    }

    #[test]
    fn chain_read_returns_incoming_after_write() {
        let mut c = int_chain(10);
        c.put(0, Value::Int(0)).unwrap();
        for k in 0..10u64 {
            let v = c.read(k).unwrap();
            c.write(0, k, Value::Int(v.as_int().unwrap() + 1)).unwrap();
            assert_eq!(c.read(k), Some(Value::Int(k as i64)));
        }
        assert_eq!(c.get(), Some(Value::Int(10)));
    }

    #[test]
    fn empty_chain_passes_source_through() {
        let mut c = int_chain(0);
        c.put(0, Value::Int(7)).unwrap();
        assert_eq!(c.get(), Some(Value::Int(7)));
    }

    #[test]
    fn read_blocks_until_fed() {
        let g = Channel::new(Direction::Global, ValueClass::IntegerScalar, 3);
        assert_eq!(g.read(0), None);
        let c = int_chain(3);
        assert_eq!(c.read(1), None);
    }

    #[test]
    fn single_assignment() {
        let mut g = Channel::new(Direction::Global, ValueClass::IntegerScalar, 3);
        g.put(0, Value::Int(1)).unwrap();
        assert!(matches!(g.put(0, Value::Int(2)), Err(ChannelError::DoubleWrite { .. })));
        let mut c = int_chain(2);
        c.write(0, 1, Value::Int(1)).unwrap();
        assert!(c.write(0, 1, Value::Int(2)).is_err());
        assert!(g.write(0, 0, Value::Int(1)).is_err());
    }

    #[test]
    fn float_channel_coerces() {
        let mut g = Channel::new(Direction::Global, ValueClass::FloatScalar, 1);
        g.put(0, Value::Int(3)).unwrap();
        assert_eq!(g.read(0), Some(Value::Float(3.0)));
    }

    #[test]
    fn forwarded_links_pass_through() {
        let mut c = int_chain(3);
        c.put(0, Value::Int(5)).unwrap();
        c.forward(0);
        c.forward(1);
        assert_eq!(c.read(2), Some(Value::Int(5)));
        c.write(0, 2, Value::Int(6)).unwrap();
        assert_eq!(c.get(), Some(Value::Int(6)));
    }

    proptest! {
        // Any write order gives the same reads as the sequential oracle.
        #[test]
        fn chain_matches_sequential_sum(vals in proptest::collection::vec(-100i64..100, 0..12), seed in any::<u64>()) {
            let n = vals.len() as u64;
            let mut c = int_chain(n);
            c.put(0, Value::Int(0)).unwrap();
            let mut done = vec![false; vals.len()];
            let mut s = seed;
            while done.iter().any(|d| !d) {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let k = (s >> 33) as usize % vals.len();
                if done[k] { continue; }
                if let Some(v) = c.read(k as u64) {
                    c.write(0, k as u64, Value::Int(v.as_int().unwrap() + vals[k])).unwrap();
                    done[k] = true;
                }
            }
            let mut expect = 0;
            for (k, v) in vals.iter().enumerate() {
                prop_assert_eq!(c.read(k as u64), Some(Value::Int(expect)));
                expect += v;
            }
            prop_assert_eq!(c.get(), Some(Value::Int(expect)));
        }
    }
}
