import { describe, expect, it } from "vitest";

import {
  costOrdering,
  eligibilityView,
  fieldErrors,
  manualFormValid,
  offlineView,
  parcelRows,
  scenarioCards,
} from "../src/viewmodels";
import type { ScenarioResult, WhatIfResponse } from "../src/types";

function whatIfResponse(lienOk: boolean): WhatIfResponse {
  return {
    parcel_id: "P000001",
    eligible: lienOk, // other criteria pass in this fixture
    criteria: [
      { name: "location", ok: true, provenance: "observed", detail: "VineCity" },
      { name: "owner_occupancy", ok: true, provenance: "observed", detail: "" },
      { name: "liens", ok: lienOk, provenance: lienOk ? "simulated" : "attested", detail: "" },
      { name: "income", ok: true, provenance: "predicted", detail: "household size 3" },
      { name: "tenure_one_year", ok: true, provenance: "assumed", detail: "" },
      { name: "heir_status", ok: true, provenance: "assumed", detail: "" },
      { name: "enrollment_window", ok: true, provenance: "assumed", detail: "" },
    ],
    household_size: 3,
    projection: [
      [2018, 100_000], [2019, 103_000], [2020, 107_000], [2021, 110_000],
      [2022, 115_000], [2023, 119_000], [2024, 125_000],
    ],
    subsidy_7yr: 1_842.5,
    bundle_checksum: "abc",
  };
}

describe("what-if eligibility view", () => {
  it("lien toggle flips the displayed verdict", () => {
    const before = eligibilityView(whatIfResponse(true));
    expect(before.eligible).toBe(true);
    expect(before.badge).toBe("eligible");

    const after = eligibilityView(whatIfResponse(false));
    expect(after.eligible).toBe(false);
    expect(after.badge).toBe("ineligible");
    const lienRow = after.criteria.find((c) => c.name === "liens")!;
    expect(lienRow.ok).toBe(false);
    expect(lienRow.provenanceText).toContain("entered by you");
  });

  it("shows the API verdict verbatim - no client-side recomputation", () => {
    // contradictory payload: criteria all pass but eligible=false;
    // the view must trust the API verdict field
    const payload = whatIfResponse(true);
    payload.eligible = false;
    const view = eligibilityView(payload);
    expect(view.eligible).toBe(false);
  });

  it("gives every criterion a plain-language explanation", () => {
    const view = eligibilityView(whatIfResponse(true));
    for (const row of view.criteria) {
      expect(row.label.length).toBeGreaterThan(0);
      expect(row.explanation.length).toBeGreaterThan(0);
    }
  });

  it("carries the projection through for the chart", () => {
    const view = eligibilityView(whatIfResponse(true));
    expect(view.chartSeries).toHaveLength(7);
    expect(view.subsidyText).toBe("$1,843");
  });
});

function scenarioResult(meanCost: number, eligible: number): ScenarioResult {
  return {
    mean_total_cost: meanCost,
    std_total_cost: meanCost / 20,
    per_year_mean: Array.from({ length: 7 }, (_, i) => meanCost / 7 + i),
    eligible_count: eligible,
    enrolled_initial: eligible * 0.79,
    enrolled_final: eligible * 0.79 * 0.698,
    replicate_count: 300,
    warnings: [],
  };
}

describe("scenario cards", () => {
  it("preserves the simulator's cost ordering", () => {
    // monotone inputs (e.g. without WP <= with WP) stay monotone on screen
    const cards = scenarioCards([
      { label: "core", result: scenarioResult(2_100_000, 372) },
      { label: "with WP", result: scenarioResult(2_700_000, 489) },
      { label: "core no liens", result: scenarioResult(3_200_000, 560) },
      { label: "WP no liens", result: scenarioResult(4_000_000, 702) },
    ]);
    expect(costOrdering(cards)).toEqual([0, 1, 2, 3]);
    expect(cards.map((c) => c.meanCost)).toEqual(
      [2_100_000, 2_700_000, 3_200_000, 4_000_000],
    );
    expect(cards[3].meanCostText).toBe("$4.0M");
  });

  it("identical results render identical cards", () => {
    const [a, b] = scenarioCards([
      { label: "x", result: scenarioResult(1_000_000, 100) },
      { label: "x", result: scenarioResult(1_000_000, 100) },
    ]);
    expect(a).toEqual(b);
  });

  it("exposes one overlay point per program year", () => {
    const [card] = scenarioCards([{ label: "x", result: scenarioResult(700_000, 90) }]);
    expect(card.perYear).toHaveLength(7);
  });
});

describe("list and error views", () => {
  it("maps parcel summaries to badge rows", () => {
    const rows = parcelRows([
      { parcel_id: "A", neighborhood: "VineCity", situs_address: "1 Oak St",
        land_use: "OneFamily", eligible: true, cluster: 2, base_value: 90_000 },
      { parcel_id: "B", neighborhood: "EnglishAvenue", situs_address: "2 Elm St",
        land_use: "OneFamily", eligible: false, cluster: 0, base_value: 50_000 },
    ]);
    expect(rows[0].badge).toBe("eligible");
    expect(rows[1].badge).toBe("ineligible");
  });

  it("builds an offline banner with retry", () => {
    const view = offlineView(new Error("fetch failed"));
    expect(view.banner).toContain("fetch failed");
    expect(view.retry).toBe(true);
  });

  it("surfaces 422 validation payloads as field errors", () => {
    const err = Object.assign(new Error("validation failed"), {
      status: 422,
      fields: [{ field: "annual_income", message: "must be >= 0" }],
    });
    expect(fieldErrors(err)).toEqual([
      { field: "annual_income", message: "must be >= 0" },
    ]);
    expect(fieldErrors(new Error("connection refused"))).toBeNull();
    expect(fieldErrors(Object.assign(new Error("x"), { status: 500, fields: [] }))).toBeNull();
  });
});

describe("manual entry form gating", () => {
  it("requires a neighborhood before submit enables", () => {
    expect(manualFormValid({ neighborhood: "" })).toBe(false);
    expect(manualFormValid({ neighborhood: "VineCity" })).toBe(true);
  });

  it("rejects non-positive money fields and fractional bedrooms", () => {
    expect(manualFormValid({ neighborhood: "VineCity", baseValue: 0 })).toBe(false);
    expect(manualFormValid({ neighborhood: "VineCity", monthlyRent: -5 })).toBe(false);
    expect(manualFormValid({ neighborhood: "VineCity", bedrooms: 2.5 })).toBe(false);
    expect(
      manualFormValid({ neighborhood: "VineCity", bedrooms: 3, baseValue: 90_000,
                        monthlyRent: 900 }),
    ).toBe(true);
  });
});
