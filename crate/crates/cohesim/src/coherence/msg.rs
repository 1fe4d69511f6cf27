//! Typed coherence protocol messages.
//!
//! Every message belongs to a transaction and is tagged with its id, which is
//! what lets the traffic analyzer attribute each transmission exactly once.
//! The kind fixes both the virtual network and the packet length: messages
//! that carry a cache line travel as 5 flits (64 B line over 128-bit flits),
//! everything else as a single control flit.

use crate::noc::VirtualNet;

pub const LINE_BYTES: u64 = 64;
pub const MEMORY_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgKind {
    GetS,
    GetM,
    PutM,
    PutE,
    FwdGetS,
    FwdGetM,
    Inv,
    InvAck,
    /// Data from the home; `acks` invalidations are outstanding for a write,
    /// `exclusive` grants E on a read to an otherwise uncached line.
    Data {
        acks: u32,
        exclusive: bool,
    },
    DataOwnerToReq,
    DataOwnerToDir,
    AckCount(u32),
    WBAck,
}

impl MsgKind {
    pub fn vnet(self) -> VirtualNet {
        match self {
            MsgKind::GetS | MsgKind::GetM | MsgKind::PutM | MsgKind::PutE => VirtualNet::Request,
            MsgKind::FwdGetS | MsgKind::FwdGetM | MsgKind::Inv => VirtualNet::Forward,
            MsgKind::InvAck
            | MsgKind::Data { .. }
            | MsgKind::DataOwnerToReq
            | MsgKind::DataOwnerToDir
            | MsgKind::AckCount(_)
            | MsgKind::WBAck => VirtualNet::Response,
        }
    }

    pub fn carries_data(self) -> bool {
        matches!(
            self,
            MsgKind::Data { .. }
                | MsgKind::DataOwnerToReq
                | MsgKind::DataOwnerToDir
                | MsgKind::PutM
        )
    }

    pub fn flit_count(self) -> u8 {
        if self.carries_data() {
            5
        } else {
            1
        }
    }

    /// Stable index for histograms.
    pub fn index(self) -> usize {
        match self {
            MsgKind::GetS => 0,
            MsgKind::GetM => 1,
            MsgKind::PutM => 2,
            MsgKind::PutE => 3,
            MsgKind::FwdGetS => 4,
            MsgKind::FwdGetM => 5,
            MsgKind::Inv => 6,
            MsgKind::InvAck => 7,
            MsgKind::Data { .. } => 8,
            MsgKind::DataOwnerToReq => 9,
            MsgKind::DataOwnerToDir => 10,
            MsgKind::AckCount(_) => 11,
            MsgKind::WBAck => 12,
        }
    }

    pub const COUNT: usize = 13;

    pub fn name_of(index: usize) -> &'static str {
        [
            "GetS",
            "GetM",
            "PutM",
            "PutE",
            "FwdGetS",
            "FwdGetM",
            "Inv",
            "InvAck",
            "Data",
            "DataOwnerToReq",
            "DataOwnerToDir",
            "AckCount",
            "WBAck",
        ][index]
    }
}

/// One protocol message in flight between two controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceMessage {
    pub kind: MsgKind,
    /// Line-aligned address.
    pub addr: u64,
    /// Core that started the transaction this message belongs to.
    pub requester: usize,
    pub txn: u64,
    pub src: usize,
    pub dst: usize,
    /// Data version riding along on data-bearing messages (testing oracle).
    pub data: Option<u64>,
}

pub fn align_line(addr: u64) -> u64 {
    addr & !(LINE_BYTES - 1)
}

/// Address-interleaved home: line index modulo the core count picks the core
/// whose directory slice owns the address.
pub fn home_of(addr: u64, core_nodes: &[usize]) -> usize {
    debug_assert!(addr < MEMORY_BYTES);
    let slice = (addr / LINE_BYTES) as usize % core_nodes.len();
    core_nodes[slice]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn home_interleaves_by_line() {
        let cores: Vec<usize> = (0..16).collect();
        assert_eq!(home_of(0, &cores), 0);
        assert_eq!(home_of(64, &cores), 1);
        assert_eq!(home_of(4096, &cores), 0);
        assert_eq!(home_of(4096 + 5 * 64, &cores), 5);
    }

    #[test]
    fn vnet_and_sizing_follow_kind() {
        assert_eq!(MsgKind::GetS.vnet(), VirtualNet::Request);
        assert_eq!(MsgKind::PutE.vnet(), VirtualNet::Request);
        assert_eq!(MsgKind::Inv.vnet(), VirtualNet::Forward);
        assert_eq!(MsgKind::FwdGetM.vnet(), VirtualNet::Forward);
        assert_eq!(MsgKind::WBAck.vnet(), VirtualNet::Response);
        assert_eq!(MsgKind::InvAck.flit_count(), 1);
        assert_eq!(MsgKind::PutM.flit_count(), 5);
        assert_eq!(
            MsgKind::Data {
                acks: 0,
                exclusive: false
            }
            .flit_count(),
            5
        );
        assert_eq!(MsgKind::DataOwnerToDir.flit_count(), 5);
        assert_eq!(MsgKind::AckCount(3).flit_count(), 1);
    }
}
