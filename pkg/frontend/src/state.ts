// App state lives entirely in the URL hash so any view can be reloaded
// or shared as a link and reproduce itself from API data alone.

export type View = "explore" | "whatif" | "scenarios";

export interface WhatIfOverrides {
  householdSize?: number;
  annualIncome?: number;
  hasLien?: boolean;
  tenureOneYear?: boolean;
  heirStatus?: boolean;
  enrollmentWindow?: boolean;
}

export interface AppState {
  view: View;
  neighborhood: string | null;
  page: number;
  parcelId: string | null;
  overrides: WhatIfOverrides;
  scenarioPreset: string | null;
}

export const DEFAULT_STATE: AppState = {
  view: "explore",
  neighborhood: null,
  page: 1,
  parcelId: null,
  overrides: {},
  scenarioPreset: null,
};

const FLAGS: [keyof WhatIfOverrides, string][] = [
  ["hasLien", "lien"],
  ["tenureOneYear", "tenure"],
  ["heirStatus", "heir"],
  ["enrollmentWindow", "window"],
];

export function encodeState(state: AppState): string {
  const params = new URLSearchParams();
  if (state.view !== "explore") params.set("view", state.view);
  if (state.neighborhood) params.set("n", state.neighborhood);
  if (state.page !== 1) params.set("page", String(state.page));
  if (state.parcelId) params.set("parcel", state.parcelId);
  if (state.overrides.householdSize !== undefined)
    params.set("size", String(state.overrides.householdSize));
  if (state.overrides.annualIncome !== undefined)
    params.set("income", String(state.overrides.annualIncome));
  for (const [key, name] of FLAGS) {
    const value = state.overrides[key];
    if (typeof value === "boolean") params.set(name, value ? "1" : "0");
  }
  if (state.scenarioPreset) params.set("preset", state.scenarioPreset);
  const text = params.toString();
  return text ? `#${text}` : "";
}

export function parseState(hash: string): AppState {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  const state: AppState = { ...DEFAULT_STATE, overrides: {} };
  const view = params.get("view");
  if (view === "whatif" || view === "scenarios" || view === "explore") state.view = view;
  state.neighborhood = params.get("n");
  const page = Number(params.get("page") ?? "1");
  state.page = Number.isInteger(page) && page >= 1 ? page : 1;
  state.parcelId = params.get("parcel");
  const size = params.get("size");
  if (size !== null && !Number.isNaN(Number(size)))
    state.overrides.householdSize = Number(size);
  const income = params.get("income");
  if (income !== null && !Number.isNaN(Number(income)))
    state.overrides.annualIncome = Number(income);
  for (const [key, name] of FLAGS) {
    const value = params.get(name);
    if (value === "1") state.overrides[key] = true as never;
    else if (value === "0") state.overrides[key] = false as never;
  }
  state.scenarioPreset = params.get("preset");
  return state;
}
