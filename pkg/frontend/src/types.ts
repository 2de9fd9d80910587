// Payload shapes for the /api/v1 JSON endpoints.

export interface ParcelSummary {
  parcel_id: string;
  neighborhood: string;
  situs_address: string;
  land_use: string;
  eligible: boolean;
  cluster: number | null;
  base_value: number | null;
}

export interface ParcelPage {
  items: ParcelSummary[];
  page: number;
  page_size: number;
  total: number;
  bundle_checksum: string;
}

export interface EligibilityPayload {
  eligible: boolean;
  reasons: string[];
  location_ok: boolean;
  owner_ok: boolean;
  lien_ok: boolean;
  income_ok: boolean;
  lien_provenance: string;
  estimated_household_size: number;
  income_indeterminate: boolean;
  estimated_income?: number | null;
}

export interface ParcelDetail {
  parcel_id: string;
  neighborhood: string;
  situs_address: string;
  land_use: string;
  characteristics: Record<string, number | boolean>;
  cluster: number | null;
  base_year: number | null;
  base_value: number | null;
  projection: [number, number][] | null;
  eligibility: EligibilityPayload;
  bundle_checksum: string;
}

export interface Criterion {
  name: string;
  ok: boolean;
  provenance: string;
  detail: string;
}

export interface WhatIfResponse {
  parcel_id: string | null;
  eligible: boolean;
  criteria: Criterion[];
  household_size: number;
  projection: [number, number][] | null;
  subsidy_7yr: number | null;
  bundle_checksum: string;
  estimated_income?: number | null;
}

export interface Attestations {
  tenure_one_year?: boolean;
  heir_status?: boolean;
  enrollment_window?: boolean;
}

export interface WhatIfRequest {
  parcel_id?: string;
  features?: {
    neighborhood: string;
    bedrooms?: number;
    rooms?: number;
    bathrooms?: number;
    year_built?: number;
    heated_sqft?: number;
    base_value?: number;
    owner_occupied?: boolean;
    monthly_rent?: number;
  };
  household_size?: number;
  annual_income?: number;
  has_lien?: boolean;
  attestations?: Attestations;
  include_estimates?: boolean;
}

export interface ScenarioResult {
  mean_total_cost: number;
  std_total_cost: number;
  per_year_mean: number[];
  eligible_count: number;
  enrolled_initial: number;
  enrolled_final: number;
  replicate_count: number;
  warnings: string[];
}

export interface ScenarioResponse {
  id: string;
  status: "done" | "running" | "failed";
  result?: ScenarioResult;
  poll?: string;
  error?: string;
  bundle_checksum: string;
}

export interface ScenarioConfigInput {
  label: string;
  include_washington_park: boolean;
  lien_mode: "ObservedOnly" | "SampledRate" | "Ignore";
  dropout_rate: number;
  enrollment_rate: number;
  replicates: number;
  seed: number;
}
