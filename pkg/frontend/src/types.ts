// Client-side mirrors of the REST payloads. All state comes from /v1/*;
// the UI never recomputes classes, verdicts, or scores.

export type StabilityClass = "Stable" | "Investigable" | "Internal";

export interface CatalogEntry {
  address: string;
  score: number;
  class: StabilityClass;
  text_match: number;
  usage: number;
  rating: number | null;
  description: string;
  tags: string[];
}

export interface StabilityAttribute {
  category: string;
  check: string;
  passed: boolean;
  evidence: string;
}

export interface StabilityReport {
  product: string;
  attributes: StabilityAttribute[];
  class: StabilityClass;
  evaluated_at: string;
}

export interface PiiFinding {
  id: string;
  table: string;
  path: string;
  pii_class: string;
  confidence: string;
  state: string;
  value_hit_fraction: number;
}

export interface FeedbackEntry {
  product: string;
  principal: string;
  rating: number;
  comment: string;
  at: string;
}

export interface ProductDetail {
  address: string;
  resources: string[];
  owner: string;
  support_channel: string;
  description: string;
  business_objective: string;
  tags: string[];
  class: StabilityClass;
  rating: number | null;
  stability_history: StabilityReport[];
  pii_findings: PiiFinding[];
  feedback: FeedbackEntry[];
}

export interface GraphNode {
  kind: string;
  id: string;
}

export interface GraphEdge {
  src: GraphNode;
  dst: GraphNode;
  relation: string;
  weight: number;
  first_seen: string;
  last_seen: string;
  provenance: string[];
}

export interface LineageGraph {
  window: { from: string | null; to: string | null };
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface Suggestion {
  id: string;
  kind: "ClusterKey" | "DisableFailsafe";
  path: string | null;
  target: string;
  state: "pending" | "accepted" | "rejected" | "applied";
  created_at: string;
  evidence: {
    window: { from: string | null; to: string | null };
    query_count: number;
    path_shares?: Record<string, number>;
    path_weights?: Record<string, number>;
    avg_partitions_scanned?: Record<string, number | null>;
    derivation_proof?: { query_id: string; mode: string; reads: string[] }[];
  };
}

export interface AccessGroup {
  id: string;
  tenant: string;
  members: string[];
  admins: string[];
  resources: string[];
  permissions: string[];
}
