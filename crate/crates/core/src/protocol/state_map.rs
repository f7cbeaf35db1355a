use std::collections::BTreeSet;
use std::fmt;

use super::coding::ReceiverState;
use super::ProtocolError;
use crate::feedback::TransmitterView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Received,
    Lost,
    Unknown,
}

/// The transmitter's receiver-by-packet belief matrix. `Received` is
/// absorbing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketStateMap {
    receivers: usize,
    packets: usize,
    cells: Vec<CellState>,
}

impl PacketStateMap {
    pub fn new(receivers: usize, packets: usize, initial: CellState) -> Self {
        Self {
            receivers,
            packets,
            cells: vec![initial; receivers * packets],
        }
    }

    /// Exact map built from the receivers' actual holdings.
    pub fn from_receivers(rx: &[ReceiverState], packets: usize) -> Self {
        let mut map = Self::new(rx.len(), packets, CellState::Lost);
        for (r, state) in rx.iter().enumerate() {
            for m in 0..packets {
                if state.has(m) {
                    map.mark(r, m, CellState::Received);
                }
            }
        }
        map
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    pub fn get(&self, receiver: usize, packet: usize) -> CellState {
        self.cells[receiver * self.packets + packet]
    }

    pub fn is_received(&self, receiver: usize, packet: usize) -> bool {
        self.get(receiver, packet) == CellState::Received
    }

    /// Sets a cell unless it is already `Received`.
    pub fn mark(&mut self, receiver: usize, packet: usize, state: CellState) {
        let cell = &mut self.cells[receiver * self.packets + packet];
        if *cell != CellState::Received {
            *cell = state;
        }
    }

    /// Records the feedback of a plain (single-packet) transmission.
    pub fn apply_plain_view(&mut self, receiver: usize, packet: usize, view: TransmitterView) {
        let state = match view {
            TransmitterView::SawAck => CellState::Received,
            TransmitterView::SawNak => CellState::Lost,
            TransmitterView::SawNothing => CellState::Unknown,
        };
        self.mark(receiver, packet, state);
    }

    /// Records the feedback of a coded transmission: an ACK means the
    /// receiver holds every constituent; anything else leaves the row as is.
    pub fn apply_coded_view(
        &mut self,
        receiver: usize,
        constituents: &BTreeSet<usize>,
        view: TransmitterView,
    ) {
        if view == TransmitterView::SawAck {
            for &m in constituents {
                self.mark(receiver, m, CellState::Received);
            }
        }
    }

    /// True while any cell is not `Received`.
    pub fn has_pending(&self) -> bool {
        self.cells.iter().any(|&c| c != CellState::Received)
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Receivers missing exactly one packet of `set` under this map, with
    /// `Unknown` counted as missing.
    pub fn served_by(&self, set: &BTreeSet<usize>) -> Vec<usize> {
        (0..self.receivers)
            .filter(|&r| set.iter().filter(|&&m| !self.is_received(r, m)).count() == 1)
            .collect()
    }
}

impl fmt::Display for PacketStateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.receivers {
            let row: String = (0..self.packets)
                .map(|m| match self.get(r, m) {
                    CellState::Received => '+',
                    CellState::Lost => '-',
                    CellState::Unknown => '?',
                })
                .collect();
            writeln!(f, "R{}: {}", r + 1, row)?;
        }
        Ok(())
    }
}

/// First-fit growth of a combination seeded with `start`.
///
/// Receivers are visited in index order. A receiver that already holds every
/// chosen packet contributes its lowest-indexed missing packet that all
/// currently targeted receivers hold. Every receiver missing any chosen packet
/// therefore misses exactly one.
fn grow(map: &PacketStateMap, start: usize) -> (Vec<usize>, usize) {
    let k = map.receivers();
    let mut chosen = vec![start];
    let mut missing: Vec<usize> = (0..k).map(|r| usize::from(!map.is_received(r, start))).collect();
    for r in 0..k {
        if missing[r] > 0 {
            continue;
        }
        let candidate = (0..map.packets()).find(|&m| {
            !map.is_received(r, m)
                && (0..k).all(|t| missing[t] == 0 || map.is_received(t, m))
        });
        if let Some(m) = candidate {
            chosen.push(m);
            for (t, miss) in missing.iter_mut().enumerate() {
                if !map.is_received(t, m) {
                    *miss += 1;
                }
            }
        }
    }
    let served = missing.iter().filter(|&&c| c == 1).count();
    (chosen, served)
}

/// Picks the constituents of the next coded retransmission.
///
/// Runs [`grow`] from every packet that some receiver still lacks, in packet
/// order, and keeps the combination serving the most receivers (earliest
/// start on ties). `Unknown` cells count as lost. The result is instantly
/// decodable at every receiver it serves.
pub fn select_combination(map: &PacketStateMap) -> Result<BTreeSet<usize>, ProtocolError> {
    let mut best: Option<(usize, Vec<usize>)> = None;
    for start in 0..map.packets() {
        if (0..map.receivers()).all(|r| map.is_received(r, start)) {
            continue;
        }
        let (chosen, served) = grow(map, start);
        if best.as_ref().is_none_or(|(s, _)| served > *s) {
            best = Some((served, chosen));
        }
    }
    best.map(|(_, c)| c.into_iter().collect())
        .ok_or(ProtocolError::NothingLost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use CellState::*;

    fn map_from(rows: &[&[CellState]]) -> PacketStateMap {
        let mut map = PacketStateMap::new(rows.len(), rows[0].len(), Lost);
        for (r, row) in rows.iter().enumerate() {
            for (m, &s) in row.iter().enumerate() {
                map.mark(r, m, s);
            }
        }
        map
    }

    #[test]
    fn received_is_absorbing() {
        let mut map = PacketStateMap::new(1, 1, Unknown);
        map.mark(0, 0, Received);
        map.mark(0, 0, Lost);
        map.apply_plain_view(0, 0, TransmitterView::SawNothing);
        assert_eq!(map.get(0, 0), Received);
        assert!(!map.has_pending());
    }

    #[test]
    fn two_receiver_swap_pairs_up() {
        // R1 holds a and lost b; R2 the reverse.
        let map = map_from(&[&[Received, Lost], &[Lost, Received]]);
        assert_eq!(select_combination(&map).unwrap(), BTreeSet::from([0, 1]));
    }

    #[test]
    fn single_receiver_gets_one_packet() {
        let map = map_from(&[&[Lost, Lost]]);
        assert_eq!(select_combination(&map).unwrap(), BTreeSet::from([0]));
    }

    #[test]
    fn blocking_receiver_limits_pairing() {
        let map = map_from(&[
            &[Received, Lost, Received],
            &[Received, Received, Lost],
            &[Received, Lost, Lost],
        ]);
        let chosen = select_combination(&map).unwrap();
        assert_eq!(chosen, BTreeSet::from([1]));
        assert_eq!(map.served_by(&chosen), vec![0, 2]);
    }

    #[test]
    fn unknown_counts_as_lost() {
        let map = map_from(&[&[Unknown, Received], &[Received, Lost]]);
        assert_eq!(select_combination(&map).unwrap(), BTreeSet::from([0, 1]));
        let map = map_from(&[&[Unknown, Lost], &[Lost, Received]]);
        // R1 misses both; the best it can do is serve both via packet 0.
        assert_eq!(select_combination(&map).unwrap(), BTreeSet::from([0]));
    }

    #[test]
    fn nothing_lost_is_an_error() {
        let map = PacketStateMap::new(2, 3, Received);
        assert!(matches!(select_combination(&map), Err(ProtocolError::NothingLost)));
    }

    #[test]
    fn multi_start_beats_lowest_index_start() {
        // Starting from packet 0 serves two receivers; starting from 1 serves all four.
        let map = map_from(&[
            &[Lost, Lost, Received],
            &[Received, Received, Lost],
            &[Received, Lost, Received],
            &[Received, Lost, Received],
        ]);
        let chosen = select_combination(&map).unwrap();
        assert_eq!(map.served_by(&chosen).len(), 4, "{chosen:?}");
    }
}
