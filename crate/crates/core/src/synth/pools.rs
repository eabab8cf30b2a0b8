//! Built-in value pools for the synthetic generator.
//!
//! Golden files and frozen test values depend on these lists and on their
//! order. Bump [`POOL_VERSION`] whenever an entry changes.

pub const POOL_VERSION: u32 = 1;

pub const GIVEN_NAMES: &[&str] = &[
    "Anna", "Ben", "Clara", "David", "Eva", "Felix", "Greta", "Hugo", "Ida", "Jonas", "Karin",
    "Lukas", "Mia", "Noah", "Olga", "Paul", "Rosa", "Simon", "Tina", "Uwe", "Vera", "Walter",
    "Xenia", "Yusuf", "Zoe", "Marta", "Tamas", "Eszter", "Bence", "Chen", "Li", "Wei", "Ming",
    "Nuno", "Ines", "Joao", "Sofia",
];

pub const SURNAMES: &[&str] = &[
    "Lorem",
    "Ipsum",
    "Dolor",
    "Amet",
    "Consectetur",
    "Adipiscing",
    "Elit",
    "Sed",
    "Tempor",
    "Incididunt",
    "Labore",
    "Magna",
    "Aliqua",
    "Veniam",
    "Nostrud",
    "Ullamco",
    "Laboris",
    "Nisi",
    "Aliquip",
    "Commodo",
    "Duis",
    "Aute",
    "Irure",
    "Velit",
    "Esse",
    "Cillum",
    "Fugiat",
    "Nulla",
    "Pariatur",
    "Excepteur",
    "Sint",
    "Occaecat",
];

pub const COUNTRIES: &[&str] = &[
    "Austria",
    "China",
    "Germany",
    "Hungary",
    "Macau",
    "New Zealand",
    "Portugal",
    "United States",
];

pub const CITIES: &[&str] = &[
    "Graz",
    "Linz",
    "Wien",
    "Shenzhen",
    "Zhuhai",
    "Berlin",
    "Hamburg",
    "Budapest",
    "Szeged",
    "Taipa",
    "Auckland",
    "Wellington",
    "Lisboa",
    "Porto",
    "Nashville",
    "Boston",
];

pub const STREETS: &[&str] = &[
    "Lorem Str.",
    "Ipsum Weg",
    "Dolor Gasse",
    "Sit Avenue",
    "Amet Road",
    "Tempor Lane",
    "Magna Platz",
    "Veniam Rua",
    "Aliqua Utca",
    "Nostrud Boulevard",
];

/// Endoscopy findings in the style of the Minimal Standard Terminology.
pub const DIAGNOSES: &[&str] = &[
    "Colon: Primary malignant tumor, Quiescent Crohn's disease",
    "Esophagus: Normal, Ectopic gastric mucosa",
    "Esophagus: Reflux esophagitis",
    "Esophagus: Varices certain",
    "Esophagus: Barrett's esophagus",
    "Stomach: Normal",
    "Stomach: Ulcer, Erosive gastritis",
    "Stomach: Polyp",
    "Duodenum: Normal",
    "Duodenum: Ulcer",
    "Colon: Diverticulosis",
    "Colon: Polyp, Adenoma suspected",
    "Rectum: Hemorrhoids",
    "Colon: Active ulcerative colitis",
];

pub const DOCTOR_GIVEN_NAMES: &[&str] = &[
    "Tom", "Sarah", "James", "Helen", "Peter", "Laura", "Michael", "Julia", "Robert", "Nora",
    "Andrew", "Grace", "Daniel", "Alice", "Stefan", "Katalin", "Zhang", "Wang",
];

pub const DOCTOR_FAMILY_NAMES: &[&str] = &[
    "Baker", "Smith", "Miller", "Fischer", "Weber", "Wagner", "Nagy", "Kovacs", "Silva", "Santos",
    "Brown", "Taylor", "Wilson", "Hoffmann", "Schulz", "Horvath", "Lin", "Ho",
];

/// Exactly one hundred distinct medication names. Every entry passes the
/// default input guards so any of them can be used as a query parameter.
pub const MEDICATIONS: &[&str] = &[
    "Abilify",
    "Acetaminophen",
    "Acyclovir",
    "Adalimumab",
    "Albuterol",
    "Alendronate",
    "Allopurinol",
    "Alprazolam",
    "Amiodarone",
    "Amitriptyline",
    "Amlodipine",
    "Amoxicillin",
    "Anastrozole",
    "Apixaban",
    "Aripiprazole",
    "Atenolol",
    "Atorvastatin",
    "Azathioprine",
    "Azithromycin",
    "Baclofen",
    "Benazepril",
    "Budesonide",
    "Bupropion",
    "Buspirone",
    "Candesartan",
    "Captopril",
    "Carbamazepine",
    "Carvedilol",
    "Cefalexin",
    "Celecoxib",
    "Cetirizine",
    "Ciprofloxacin",
    "Citalopram",
    "Clarithromycin",
    "Clonazepam",
    "Clopidogrel",
    "Colchicine",
    "Cyclobenzaprine",
    "Dapagliflozin",
    "Diazepam",
    "Diclofenac",
    "Digoxin",
    "Diltiazem",
    "Donepezil",
    "Doxycycline",
    "Duloxetine",
    "Enalapril",
    "Entecavir",
    "Escitalopram",
    "Esomeprazole",
    "Famotidine",
    "Fenofibrate",
    "Fluconazole",
    "Fluoxetine",
    "Furosemide",
    "Gabapentin",
    "Glimepiride",
    "Glipizide",
    "Hydralazine",
    "Hydrochlorothiazide",
    "Ibuprofen",
    "Infliximab",
    "Insulin glargine",
    "Irbesartan",
    "Isoniazid",
    "Ketorolac",
    "Lamotrigine",
    "Lansoprazole",
    "Levetiracetam",
    "Levofloxacin",
    "Levothyroxine",
    "Lisinopril",
    "Loratadine",
    "Losartan",
    "Meloxicam",
    "Mesalamine",
    "Metformin",
    "Methotrexate",
    "Metoclopramide",
    "Metoprolol",
    "Metronidazole",
    "Mirtazapine",
    "Montelukast",
    "Naproxen",
    "Nifedipine",
    "Omeprazole",
    "Ondansetron",
    "Pantoprazole",
    "Paroxetine",
    "Prednisone",
    "Pregabalin",
    "Propranolol",
    "Quetiapine",
    "Ramipril",
    "Ranitidine",
    "Rosuvastatin",
    "Sertraline",
    "Simvastatin",
    "Tenofovir",
    "Warfarin",
];
