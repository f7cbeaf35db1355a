use std::collections::{BTreeMap, BTreeSet};

use super::ProtocolError;

/// One source packet of a transmission phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: usize,
    pub payload: Vec<u8>,
}

/// XOR of one or more source packets. A singleton is a plain packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub constituents: BTreeSet<usize>,
    pub payload: Vec<u8>,
}

impl From<&Packet> for CodedPacket {
    fn from(p: &Packet) -> Self {
        Self {
            constituents: BTreeSet::from([p.id]),
            payload: p.payload.clone(),
        }
    }
}

impl From<Packet> for CodedPacket {
    fn from(p: Packet) -> Self {
        Self {
            constituents: BTreeSet::from([p.id]),
            payload: p.payload,
        }
    }
}

/// XORs packets together. Constituent sets combine by symmetric difference,
/// so a packet XORed with itself cancels out.
pub fn xor_combine<'a, I>(parts: I) -> Result<CodedPacket, ProtocolError>
where
    I: IntoIterator<Item = &'a CodedPacket>,
{
    let mut iter = parts.into_iter();
    let first = iter.next().ok_or(ProtocolError::EmptyCombination)?;
    let mut acc = first.clone();
    for p in iter {
        if p.payload.len() != acc.payload.len() {
            return Err(ProtocolError::LengthMismatch {
                expected: acc.payload.len(),
                found: p.payload.len(),
            });
        }
        for (a, b) in acc.payload.iter_mut().zip(&p.payload) {
            *a ^= b;
        }
        acc.constituents = acc
            .constituents
            .symmetric_difference(&p.constituents)
            .copied()
            .collect();
    }
    if acc.constituents.is_empty() {
        return Err(ProtocolError::Degenerate);
    }
    Ok(acc)
}

/// What one receiver knows: decoded packets and coded packets it cannot
/// decode yet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReceiverState {
    have: BTreeMap<usize, Vec<u8>>,
    buffer: Vec<CodedPacket>,
}

impl ReceiverState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn have(&self) -> BTreeSet<usize> {
        self.have.keys().copied().collect()
    }

    pub fn has(&self, id: usize) -> bool {
        self.have.contains_key(&id)
    }

    pub fn has_all<'a, I: IntoIterator<Item = &'a usize>>(&self, ids: I) -> bool {
        ids.into_iter().all(|id| self.have.contains_key(id))
    }

    pub fn payload(&self, id: usize) -> Option<&[u8]> {
        self.have.get(&id).map(Vec::as_slice)
    }

    pub fn buffered(&self) -> &[CodedPacket] {
        &self.buffer
    }

    pub fn count(&self) -> usize {
        self.have.len()
    }

    fn missing<'a>(&'a self, coded: &'a CodedPacket) -> impl Iterator<Item = usize> + 'a {
        coded
            .constituents
            .iter()
            .copied()
            .filter(|id| !self.have.contains_key(id))
    }

    /// Recovers the single missing constituent of `coded`.
    fn recover(&mut self, coded: &CodedPacket, target: usize) {
        let mut payload = coded.payload.clone();
        for id in &coded.constituents {
            if *id != target {
                for (a, b) in payload.iter_mut().zip(&self.have[id]) {
                    *a ^= b;
                }
            }
        }
        self.have.insert(target, payload);
    }

    /// Absorbs a received coded packet. With exactly one unknown constituent
    /// it is decoded, after which buffered packets are re-examined until no
    /// more progress is possible. Returns the newly recovered ids in order.
    pub fn try_decode(&mut self, coded: CodedPacket) -> Vec<usize> {
        let (first, second) = {
            let mut missing = self.missing(&coded);
            (missing.next(), missing.next())
        };
        let target = match (first, second) {
            (None, _) => return Vec::new(),
            (Some(_), Some(_)) => {
                self.buffer.push(coded);
                return Vec::new();
            }
            (Some(t), None) => t,
        };
        self.recover(&coded, target);
        let mut recovered = vec![target];
        loop {
            let mut progressed = false;
            let mut i = 0;
            while i < self.buffer.len() {
                let missing: Vec<usize> = self.missing(&self.buffer[i]).collect();
                match missing.len() {
                    0 => {
                        self.buffer.swap_remove(i);
                    }
                    1 => {
                        let c = self.buffer.swap_remove(i);
                        self.recover(&c, missing[0]);
                        recovered.push(missing[0]);
                        progressed = true;
                    }
                    _ => i += 1,
                }
            }
            if !progressed {
                break;
            }
        }
        recovered
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pkt(id: usize, payload: &[u8]) -> CodedPacket {
        Packet {
            id,
            payload: payload.to_vec(),
        }
        .into()
    }

    #[test]
    fn self_combination_is_degenerate() {
        let a = pkt(0, &[1, 2, 3]);
        assert!(matches!(xor_combine([&a, &a]), Err(ProtocolError::Degenerate)));
        assert!(matches!(
            xor_combine(std::iter::empty()),
            Err(ProtocolError::EmptyCombination)
        ));
        let short = pkt(1, &[1]);
        assert!(matches!(
            xor_combine([&a, &short]),
            Err(ProtocolError::LengthMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn xor_cancellation() {
        let (a, b, c) = (pkt(0, &[0xA5, 0x01]), pkt(1, &[0x0F, 0xF0]), pkt(2, &[0x33, 0x44]));
        let ab = xor_combine([&a, &b]).unwrap();
        assert_eq!(ab.constituents, BTreeSet::from([0, 1]));
        let back = xor_combine([&ab, &a]).unwrap();
        assert_eq!(back, b);
        let abc = xor_combine([&a, &b, &c]).unwrap();
        assert_eq!(xor_combine([&abc, &ab]).unwrap(), c);
    }

    #[test]
    fn decode_single_missing() {
        let (a, b) = (pkt(0, &[7, 7]), pkt(1, &[9, 1]));
        let mut rx = ReceiverState::new();
        rx.try_decode(a.clone());
        let got = rx.try_decode(xor_combine([&a, &b]).unwrap());
        assert_eq!(got, vec![1]);
        assert_eq!(rx.have(), BTreeSet::from([0, 1]));
        assert_eq!(rx.payload(1), Some(&[9u8, 1][..]));
        let before = rx.clone();
        assert!(rx.try_decode(xor_combine([&a, &b]).unwrap()).is_empty());
        assert_eq!(rx, before);
    }

    #[test]
    fn buffered_chain_reaches_fixpoint() {
        let (a, b, c) = (pkt(0, &[1]), pkt(1, &[2]), pkt(2, &[4]));
        let mut rx = ReceiverState::new();
        rx.try_decode(a.clone());
        rx.try_decode(xor_combine([&a, &b, &c]).unwrap());
        assert_eq!(rx.buffered().len(), 1);
        let got = rx.try_decode(b.clone());
        assert_eq!(got, vec![1, 2]);
        assert_eq!(rx.have(), BTreeSet::from([0, 1, 2]));
        assert_eq!(rx.payload(2), Some(&[4u8][..]));
        assert!(rx.buffered().is_empty());
    }

    proptest! {
        #[test]
        fn knowledge_is_monotone_and_payloads_exact(
            sets in proptest::collection::vec(proptest::collection::btree_set(0usize..6, 1..4), 1..30),
        ) {
            let originals: Vec<CodedPacket> =
                (0..6).map(|i| pkt(i, &[i as u8 * 37 + 1, 255 - i as u8])).collect();
            let mut rx = ReceiverState::new();
            for s in sets {
                let parts: Vec<&CodedPacket> = s.iter().map(|&i| &originals[i]).collect();
                let coded = xor_combine(parts).unwrap();
                let before = rx.have();
                rx.try_decode(coded);
                let after = rx.have();
                prop_assert!(before.is_subset(&after));
                for id in &after {
                    prop_assert_eq!(rx.payload(*id).unwrap(), originals[*id].payload.as_slice());
                }
                for buffered in rx.buffered() {
                    let missing = buffered.constituents.iter().filter(|i| !rx.has(**i)).count();
                    prop_assert!(missing >= 2);
                }
            }
        }
    }
}
