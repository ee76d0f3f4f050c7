use serde::{Deserialize, Serialize};

pub const BACKGROUND: u32 = 0;
pub const ROAD: u32 = 1;

/// Name ↔ id table for semantic labels. `background` (0) and `road` (1) are
/// always present; everything else is foreground and numbered from 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticPalette {
    entries: Vec<PaletteEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub name: String,
    pub id: u32,
}

impl Default for SemanticPalette {
    fn default() -> Self {
        let mut p = SemanticPalette {
            entries: vec![
                PaletteEntry { name: "background".into(), id: BACKGROUND },
                PaletteEntry { name: "road".into(), id: ROAD },
            ],
        };
        for class in ["car", "truck", "bus", "bicycle", "pedestrian"] {
            p.intern(class);
        }
        p
    }
}

impl SemanticPalette {
    pub fn id(&self, name: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.name.as_str())
    }

    /// Id for `name`, allocating the next free foreground id if it is new.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(id) = self.id(name) {
            return id;
        }
        let id = self.entries.iter().map(|e| e.id).max().unwrap_or(ROAD).max(ROAD) + 1;
        self.entries.push(PaletteEntry { name: name.to_string(), id });
        id
    }

    /// Registers `name` with an explicit id. Fails if either is taken by a
    /// different entry, or the id is reserved.
    pub fn insert(&mut self, name: &str, id: u32) -> Result<(), String> {
        match (self.id(name), self.name(id)) {
            (Some(existing), _) if existing == id => Ok(()),
            (Some(existing), _) => Err(format!("class '{name}' already has semantic id {existing}")),
            (None, Some(other)) => Err(format!("semantic id {id} already used by '{other}'")),
            (None, None) if id <= ROAD => Err(format!("semantic id {id} is reserved")),
            (None, None) => {
                self.entries.push(PaletteEntry { name: name.to_string(), id });
                Ok(())
            }
        }
    }

    pub fn is_foreground(id: u32) -> bool {
        id > ROAD
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    /// Rebuilds a palette from stored entries, checking uniqueness and the reserved ids.
    pub fn from_entries(entries: Vec<PaletteEntry>) -> Result<Self, String> {
        let mut p = SemanticPalette { entries: Vec::new() };
        for e in entries {
            if p.id(&e.name).is_some() || p.name(e.id).is_some() {
                return Err(format!("duplicate palette entry '{}' ({})", e.name, e.id));
            }
            p.entries.push(e);
        }
        if p.id("background") != Some(BACKGROUND) || p.id("road") != Some(ROAD) {
            return Err("palette must map background=0 and road=1".into());
        }
        Ok(p)
    }
}
