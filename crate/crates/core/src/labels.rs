//! The 18-entry label set shared by annotation, prediction and evaluation.
//!
//! Label ids double as probability channel indices: channel `c` of an
//! 18-channel volume carries the probability of label id `c`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of label ids (noise + 16 semantic classes + empty).
pub const NUM_LABELS: usize = 18;
/// Number of semantic classes that participate in mIoU.
pub const NUM_SEMANTIC: usize = 16;

/// A label id in `0..=17`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub struct Label(u8);

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelKind {
    Noise,
    Semantic,
    Empty,
}

#[derive(Clone, Copy, Debug)]
pub struct LabelInfo {
    pub id: u8,
    pub name: &'static str,
    pub kind: LabelKind,
    pub movable: bool,
}

const fn sem(id: u8, name: &'static str, movable: bool) -> LabelInfo {
    LabelInfo { id, name, kind: LabelKind::Semantic, movable }
}

/// Semantic classes in benchmark table column order.
pub static LABELS: [LabelInfo; NUM_LABELS] = [
    LabelInfo { id: 0, name: "noise", kind: LabelKind::Noise, movable: false },
    sem(1, "barrier", false),
    sem(2, "bicycle", true),
    sem(3, "bus", true),
    sem(4, "car", true),
    sem(5, "const. veh.", true),
    sem(6, "motorcycle", true),
    sem(7, "pedestrian", true),
    sem(8, "traffic cone", false),
    sem(9, "trailer", true),
    sem(10, "truck", true),
    sem(11, "drive. suf.", false),
    sem(12, "other flat", false),
    sem(13, "sidewalk", false),
    sem(14, "terrain", false),
    sem(15, "manmade", false),
    sem(16, "vegetation", false),
    LabelInfo { id: 17, name: "empty", kind: LabelKind::Empty, movable: false },
];

impl Label {
    pub const NOISE: Label = Label(0);
    pub const BARRIER: Label = Label(1);
    pub const BICYCLE: Label = Label(2);
    pub const BUS: Label = Label(3);
    pub const CAR: Label = Label(4);
    pub const CONST_VEH: Label = Label(5);
    pub const MOTORCYCLE: Label = Label(6);
    pub const PEDESTRIAN: Label = Label(7);
    pub const TRAFFIC_CONE: Label = Label(8);
    pub const TRAILER: Label = Label(9);
    pub const TRUCK: Label = Label(10);
    pub const DRIVE_SURFACE: Label = Label(11);
    pub const OTHER_FLAT: Label = Label(12);
    pub const SIDEWALK: Label = Label(13);
    pub const TERRAIN: Label = Label(14);
    pub const MANMADE: Label = Label(15);
    pub const VEGETATION: Label = Label(16);
    pub const EMPTY: Label = Label(17);

    /// Validating constructor.
    pub fn new(id: u8) -> Option<Label> {
        ((id as usize) < NUM_LABELS).then_some(Label(id))
    }

    /// Builds a label from a probability channel index. Panics on an
    /// out-of-range channel, which is a programming error.
    pub fn from_channel(channel: usize) -> Label {
        assert!(channel < NUM_LABELS, "channel {channel} out of range");
        Label(channel as u8)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn info(self) -> &'static LabelInfo {
        &LABELS[self.index()]
    }

    pub fn name(self) -> &'static str {
        self.info().name
    }

    pub fn is_empty(self) -> bool {
        self == Label::EMPTY
    }

    pub fn is_noise(self) -> bool {
        self == Label::NOISE
    }

    /// Any non-empty label, noise included.
    pub fn is_occupied(self) -> bool {
        !self.is_empty()
    }

    pub fn is_semantic(self) -> bool {
        self.info().kind == LabelKind::Semantic
    }

    pub fn is_movable(self) -> bool {
        self.info().movable
    }

    /// The 16 semantic classes in table order.
    pub fn semantic() -> impl Iterator<Item = Label> {
        (1..=NUM_SEMANTIC as u8).map(Label)
    }

    /// The movable classes, i.e. the classes object tracks may carry.
    pub fn movable() -> impl Iterator<Item = Label> {
        Label::semantic().filter(|l| l.is_movable())
    }

    pub fn all() -> impl Iterator<Item = Label> {
        (0..NUM_LABELS as u8).map(Label)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<u8> for Label {
    type Error = crate::Error;

    fn try_from(id: u8) -> Result<Self, Self::Error> {
        Label::new(id).ok_or(crate::Error::InvalidLabel(id as i64))
    }
}
