//! Node identifiers of the shipped diligence graph.

pub const TRIGGER: &str = "Trigger";
pub const INTAKE: &str = "Intake";
pub const CONTEXT: &str = "ContextAgent";
pub const SOURCE_MAPPER: &str = "SourceMapper";
pub const SECTOR: &str = "Sector";
pub const COMPETITION: &str = "Competition";
pub const NEWS: &str = "News";
pub const SIGNALS: &str = "Signals";
pub const ROUTER: &str = "Router";
pub const REGISTRY_INDEX: &str = "RegistryIndex";
pub const CLASSIFY: &str = "Classify";
pub const FETCH_FIN: &str = "FetchFin";
pub const EXTRACT_FIN: &str = "ExtractFin";
pub const FIN_SUMMARY: &str = "FinSummary";
pub const FETCH_MOD: &str = "FetchMod";
pub const EXTRACT_MOD: &str = "ExtractMod";
pub const MOD_SUMMARY: &str = "ModSummary";
pub const ALT_FINANCIALS: &str = "AltFinancials";
pub const FINANCIAL_JOIN: &str = "FinancialJoin";
pub const RESEARCHER: &str = "Researcher";
pub const ANALYST: &str = "Analyst";
pub const OVERALL_INFO: &str = "OverallInfo";
pub const RENDER: &str = "RenderReport";
pub const DELIVER: &str = "Deliver";

/// Nodes of the registry branch, in graph order.
pub const REGISTRY_BRANCH: [&str; 8] = [
    REGISTRY_INDEX,
    CLASSIFY,
    FETCH_FIN,
    EXTRACT_FIN,
    FIN_SUMMARY,
    FETCH_MOD,
    EXTRACT_MOD,
    MOD_SUMMARY,
];
