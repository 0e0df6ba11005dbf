// Shapes served by the engine API; the dashboard displays these verbatim.

export interface QueueRow {
  instance_id: string;
  type_id: string;
  first_reported: number;
  factors: number[];
  f_value: number;
  linear_term: number;
  delta: number;
  flagged: boolean;
}

export interface RankEntry {
  instance_id: string;
  f_value: number;
  delta: number;
  linear_term: number;
}

export interface TickReport {
  tick: number;
  updated_types: string[];
  newly_flagged: string[];
  ranking: RankEntry[];
}

export interface DeltaBreakdown {
  lambda_by_tick: Record<string, number>;
  theta_by_tick: Record<string, string[]>;
  meta_count: number;
  omega: string[];
  m_value: number;
  n_value: number;
  delta: number;
}

export interface ModelSummary {
  type_id: string;
  factor_schema: string[];
  cold: boolean;
  samples_absorbed: number;
  n_components: number;
  epsilon: number;
  coefficients: number[];
}

export interface TickBody {
  events: Array<{
    instance_id: string;
    type_id: string;
    first_reported: number;
    factors: number[];
  }>;
  sa_priorities: Record<string, number>;
  resolved: string[];
}

// The only state that survives a reload.
export interface DashboardConfig {
  baseUrl: string;
  pollSeconds: number;
}

export const DEFAULT_CONFIG: DashboardConfig = { baseUrl: "", pollSeconds: 5 };
