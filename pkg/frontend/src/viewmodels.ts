// Pure render-model builders. Everything shown to the user comes
// straight from API responses; nothing is recomputed client-side.

import { formatMoney } from "./chart";
import type {
  Criterion,
  ParcelSummary,
  ScenarioResult,
  WhatIfResponse,
} from "./types";

// Plain-language explanations for residents; keyed by criterion name.
export const CRITERION_TEXT: Record<string, { label: string; explanation: string }> = {
  location: {
    label: "Home location",
    explanation: "The home must be in one of the covered neighborhoods.",
  },
  owner_occupancy: {
    label: "Owner lives in the home",
    explanation:
      "The owner must live at the property (a homestead exemption also counts).",
  },
  liens: {
    label: "No liens on the property",
    explanation: "The property cannot carry unpaid debts attached to it.",
  },
  income: {
    label: "Household income",
    explanation:
      "Household income must be below the area limit for the household's size.",
  },
  tenure_one_year: {
    label: "Lived here at least one year",
    explanation: "You confirm you have lived in the home for at least a year.",
  },
  heir_status: {
    label: "Heir status",
    explanation: "Heirs who meet the other conditions can also qualify.",
  },
  enrollment_window: {
    label: "Applying during the enrollment window",
    explanation: "Applications are only taken during the annual window.",
  },
};

const PROVENANCE_TEXT: Record<string, string> = {
  observed: "from public records",
  predicted: "estimated by the model",
  attested: "entered by you",
  assumed: "assumed yes until you say otherwise",
  simulated: "simulated from neighborhood rates",
  unobserved: "no record available",
  ignored: "not considered in this mode",
  user: "entered by you",
  indeterminate: "not enough information",
};

export interface CriterionRow {
  name: string;
  label: string;
  ok: boolean;
  provenance: string;
  provenanceText: string;
  explanation: string;
  detail: string;
}

export interface EligibilityView {
  eligible: boolean;
  badge: "eligible" | "ineligible";
  criteria: CriterionRow[];
  householdSize: number;
  subsidyText: string | null;
  chartSeries: [number, number][];
}

export function eligibilityView(response: WhatIfResponse): EligibilityView {
  const criteria = response.criteria.map((c: Criterion): CriterionRow => {
    const text = CRITERION_TEXT[c.name] ?? { label: c.name, explanation: "" };
    return {
      name: c.name,
      label: text.label,
      ok: c.ok,
      provenance: c.provenance,
      provenanceText: PROVENANCE_TEXT[c.provenance] ?? c.provenance,
      explanation: text.explanation,
      detail: c.detail,
    };
  });
  return {
    eligible: response.eligible,
    badge: response.eligible ? "eligible" : "ineligible",
    criteria,
    householdSize: response.household_size,
    subsidyText:
      response.subsidy_7yr === null ? null : formatMoney(response.subsidy_7yr),
    chartSeries: response.projection ?? [],
  };
}

export interface ParcelRow {
  id: string;
  address: string;
  neighborhood: string;
  badge: "eligible" | "ineligible";
}

export function parcelRows(items: ParcelSummary[]): ParcelRow[] {
  return items.map((p) => ({
    id: p.parcel_id,
    address: p.situs_address,
    neighborhood: p.neighborhood,
    badge: p.eligible ? "eligible" : "ineligible",
  }));
}

export interface ScenarioCard {
  label: string;
  meanCostText: string;
  meanCost: number;
  eligibleText: string;
  enrolledText: string;
  perYear: [number, number][]; // (year index, mean) for the overlay chart
}

export function scenarioCards(
  results: { label: string; result: ScenarioResult }[],
): ScenarioCard[] {
  return results.map(({ label, result }) => ({
    label,
    meanCost: result.mean_total_cost,
    meanCostText: formatMoney(result.mean_total_cost),
    eligibleText: `${Math.round(result.eligible_count)} eligible`,
    enrolledText: `${Math.round(result.enrolled_initial)} enrolled, ${Math.round(
      result.enrolled_final,
    )} after 7 years`,
    perYear: result.per_year_mean.map((v, i) => [i + 1, v]),
  }));
}

// Display order preserves the order costs arrived in; card ordering by
// cost must match the underlying numbers (no client-side reshuffling).
export function costOrdering(cards: ScenarioCard[]): number[] {
  return cards
    .map((card, i) => [card.meanCost, i] as [number, number])
    .sort((a, b) => a[0] - b[0])
    .map(([, i]) => i);
}

export function offlineView(error: unknown): { banner: string; retry: boolean } {
  const message = error instanceof Error ? error.message : String(error);
  return {
    banner: `Can't reach the eligibility service (${message}). Retrying may help.`,
    retry: true,
  };
}

// Validation errors (422) carry per-field messages; anything else is
// treated as an outage and handled by the offline banner.
export function fieldErrors(
  error: unknown,
): { field: string; message: string }[] | null {
  const candidate = error as { status?: number; fields?: unknown };
  if (
    candidate &&
    candidate.status === 422 &&
    Array.isArray(candidate.fields) &&
    candidate.fields.length > 0
  ) {
    return candidate.fields as { field: string; message: string }[];
  }
  return null;
}

export interface ManualFormFields {
  neighborhood: string;
  bedrooms?: number;
  baseValue?: number;
  monthlyRent?: number;
}

// Submit stays disabled until the required field is set and any
// optional numeric fields are sensible.
export function manualFormValid(fields: ManualFormFields): boolean {
  if (!fields.neighborhood) return false;
  if (fields.bedrooms !== undefined && (fields.bedrooms < 0 || !Number.isInteger(fields.bedrooms)))
    return false;
  if (fields.baseValue !== undefined && fields.baseValue <= 0) return false;
  if (fields.monthlyRent !== undefined && fields.monthlyRent <= 0) return false;
  return true;
}
