//! The ten-class semantic taxonomy and its priority categories.

use serde::{Deserialize, Serialize};

/// Semantic class of a grid cell or image pixel.
///
/// Ids are dense in `0..10`; `Unknown` marks cells without any observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum SemanticClass {
    Unknown = 0,
    Road = 1,
    Sidewalk = 2,
    Building = 3,
    Vegetation = 4,
    PoleSign = 5,
    Car = 6,
    LargeVehicle = 7,
    Person = 8,
    Bicycle = 9,
}

/// Number of semantic classes (the feature depth of one-hot grids).
pub const NUM_CLASSES: usize = 10;

impl SemanticClass {
    pub const ALL: [SemanticClass; NUM_CLASSES] = [
        SemanticClass::Unknown,
        SemanticClass::Road,
        SemanticClass::Sidewalk,
        SemanticClass::Building,
        SemanticClass::Vegetation,
        SemanticClass::PoleSign,
        SemanticClass::Car,
        SemanticClass::LargeVehicle,
        SemanticClass::Person,
        SemanticClass::Bicycle,
    ];

    #[inline]
    pub fn id(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Unknown => "unknown",
            SemanticClass::Road => "road",
            SemanticClass::Sidewalk => "sidewalk",
            SemanticClass::Building => "building",
            SemanticClass::Vegetation => "vegetation",
            SemanticClass::PoleSign => "pole_sign",
            SemanticClass::Car => "car",
            SemanticClass::LargeVehicle => "large_vehicle",
            SemanticClass::Person => "person",
            SemanticClass::Bicycle => "bicycle",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn category(self) -> Category {
        match self {
            SemanticClass::Unknown
            | SemanticClass::Road
            | SemanticClass::Sidewalk
            | SemanticClass::Building
            | SemanticClass::Vegetation => Category::Static,
            SemanticClass::PoleSign => Category::SmallStatic,
            SemanticClass::Car | SemanticClass::LargeVehicle => Category::Vehicles,
            SemanticClass::Person | SemanticClass::Bicycle => Category::SmallDynamic,
        }
    }

    /// Total order used when several classes compete for one cell: category
    /// priority first, class id second. Larger wins.
    #[inline]
    pub fn priority_key(self) -> (u8, u8) {
        (self.category().priority(), self.id())
    }

    /// Display color. Road, sidewalk, vegetation, building, large vehicle and
    /// person follow the usual street-scene palette; the rest are fixed picks.
    pub fn color(self) -> [u8; 3] {
        match self {
            SemanticClass::Unknown => [0, 0, 0],
            SemanticClass::Road => [128, 64, 128],
            SemanticClass::Sidewalk => [244, 32, 232],
            SemanticClass::Building => [70, 70, 70],
            SemanticClass::Vegetation => [107, 142, 35],
            SemanticClass::PoleSign => [220, 220, 0],
            SemanticClass::Car => [0, 0, 142],
            SemanticClass::LargeVehicle => [0, 60, 100],
            SemanticClass::Person => [220, 20, 60],
            SemanticClass::Bicycle => [119, 11, 32],
        }
    }
}

impl std::fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluation and discretization category. Ordered by ascending priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Static,
    SmallStatic,
    Vehicles,
    SmallDynamic,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::Static, Category::SmallStatic, Category::Vehicles, Category::SmallDynamic];

    #[inline]
    pub fn priority(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Static => "static",
            Category::SmallStatic => "small_static",
            Category::Vehicles => "vehicles",
            Category::SmallDynamic => "small_dynamic",
        }
    }

    pub fn members(self) -> impl Iterator<Item = SemanticClass> {
        SemanticClass::ALL.into_iter().filter(move |c| c.category() == self)
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
