// DOM rendering and event wiring. All domain numbers come from the API
// via the view models; this file only draws them.

import { ApiClient } from "./api";
import { buildLineChart, formatMoney } from "./chart";
import { AppState, WhatIfOverrides, encodeState, parseState } from "./state";
import {
  EligibilityView,
  ManualFormFields,
  eligibilityView,
  fieldErrors,
  manualFormValid,
  offlineView,
  parcelRows,
  scenarioCards,
} from "./viewmodels";
import type { ScenarioConfigInput, WhatIfRequest, WhatIfResponse } from "./types";

const NEIGHBORHOODS = [
  "AshviewHeights",
  "AtlantaUniversityCenter",
  "EnglishAvenue",
  "VineCity",
  "WashingtonPark",
];

export const SCENARIO_PRESETS: ScenarioConfigInput[] = [
  { label: "Core area, liens simulated", include_washington_park: false,
    lien_mode: "SampledRate", dropout_rate: 0.0, enrollment_rate: 1.0,
    replicates: 300, seed: 11 },
  { label: "With Washington Park, liens simulated", include_washington_park: true,
    lien_mode: "SampledRate", dropout_rate: 0.0, enrollment_rate: 1.0,
    replicates: 300, seed: 11 },
  { label: "Core, 5% dropout + 79% enrollment", include_washington_park: false,
    lien_mode: "SampledRate", dropout_rate: 0.05, enrollment_rate: 0.79,
    replicates: 300, seed: 11 },
  { label: "With WP, 5% dropout + 79% enrollment", include_washington_park: true,
    lien_mode: "SampledRate", dropout_rate: 0.05, enrollment_rate: 0.79,
    replicates: 300, seed: 11 },
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) node.append(child);
  return node;
}

export class App {
  private root: HTMLElement;

  constructor(
    private api: ApiClient,
    private state: AppState,
    private onStateChange: (s: AppState) => void,
    mount: HTMLElement,
  ) {
    this.root = mount;
  }

  private update(patch: Partial<AppState>) {
    this.state = { ...this.state, ...patch };
    this.onStateChange(this.state);
    void this.render(this.state);
  }

  private updateOverrides(patch: Partial<WhatIfOverrides>) {
    this.update({ overrides: { ...this.state.overrides, ...patch } });
  }

  async render(state: AppState): Promise<void> {
    this.state = state;
    this.root.replaceChildren(this.nav());
    try {
      if (state.view === "explore") await this.renderExplore();
      else if (state.view === "whatif") await this.renderWhatIf();
      else await this.renderScenarios();
    } catch (error) {
      this.root.append(this.offlineBanner(error));
    }
  }

  private nav(): HTMLElement {
    const tab = (view: AppState["view"], label: string) => {
      const button = el("button", {
        class: this.state.view === view ? "tab active" : "tab",
      }, [label]);
      button.onclick = () => this.update({ view });
      return button;
    };
    return el("nav", {}, [
      tab("explore", "Homes"),
      tab("whatif", "Check eligibility"),
      tab("scenarios", "Program cost"),
    ]);
  }

  private offlineBanner(error: unknown): HTMLElement {
    const model = offlineView(error);
    const banner = el("div", { class: "banner error", role: "alert" }, [model.banner]);
    if (model.retry) {
      const retry = el("button", {}, ["Retry"]);
      retry.onclick = () => void this.render(this.state);
      banner.append(retry);
    }
    return banner;
  }

  // --- parcel explorer -----------------------------------------------------

  private async renderExplore(): Promise<void> {
    const filter = el("select", { "aria-label": "Neighborhood filter" });
    filter.append(el("option", { value: "" }, ["All neighborhoods"]));
    for (const name of NEIGHBORHOODS) {
      const option = el("option", { value: name }, [name]);
      if (this.state.neighborhood === name) option.setAttribute("selected", "");
      filter.append(option);
    }
    filter.onchange = () =>
      this.update({ neighborhood: filter.value || null, page: 1, parcelId: null });
    this.root.append(el("div", { class: "toolbar" }, [filter]));

    const page = await this.api.parcels(this.state.neighborhood, this.state.page);
    const list = el("ul", { class: "parcel-list" });
    for (const row of parcelRows(page.items)) {
      const badge = el("span", { class: `badge ${row.badge}` },
                       [row.badge === "eligible" ? "Likely eligible" : "Not eligible"]);
      const item = el("li", { class: "parcel-row", "data-id": row.id }, [
        el("span", { class: "addr" }, [row.address]),
        el("span", { class: "nbhd" }, [row.neighborhood]),
        badge,
      ]);
      item.onclick = () => this.update({ parcelId: row.id });
      list.append(item);
    }
    this.root.append(list, this.pager(page.total, page.page_size));

    if (this.state.parcelId) await this.renderDetail(this.state.parcelId);
  }

  private pager(total: number, pageSize: number): HTMLElement {
    const pages = Math.max(1, Math.ceil(total / pageSize));
    const prev = el("button", {}, ["Prev"]);
    const next = el("button", {}, ["Next"]);
    prev.onclick = () => this.update({ page: Math.max(1, this.state.page - 1) });
    next.onclick = () => this.update({ page: Math.min(pages, this.state.page + 1) });
    return el("div", { class: "pager" }, [
      prev, el("span", {}, [`page ${this.state.page} of ${pages}`]), next,
    ]);
  }

  private async renderDetail(parcelId: string): Promise<void> {
    const detail = await this.api.parcel(parcelId);
    const panel = el("section", { class: "detail" }, [
      el("h2", {}, [detail.situs_address]),
      el("p", {}, [`${detail.neighborhood} - ${detail.land_use}`]),
    ]);
    if (detail.projection) {
      panel.append(el("h3", {}, ["Projected assessed value"]),
                   this.chart(detail.projection));
    }
    const badge = detail.eligibility.eligible ? "eligible" : "ineligible";
    panel.append(el("p", {}, [
      el("span", { class: `badge ${badge}` },
         [badge === "eligible" ? "Likely eligible" : "Not eligible"]),
    ]));
    const open = el("button", {}, ["Check what-if options"]);
    open.onclick = () => this.update({ view: "whatif" });
    panel.append(open);
    this.root.append(panel);
  }

  private chart(series: [number, number][]): SVGSVGElement {
    const model = buildLineChart(series);
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", `0 0 ${model.width} ${model.height}`);
    svg.setAttribute("class", "chart");
    const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("d", model.path);
    path.setAttribute("class", "chart-line");
    svg.append(path);
    for (const point of model.points) {
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", String(point.x));
      dot.setAttribute("cy", String(point.y));
      dot.setAttribute("r", "3");
      dot.setAttribute("class", "chart-point");
      dot.append(
        Object.assign(document.createElementNS("http://www.w3.org/2000/svg", "title"),
                      { textContent: `${point.year}: ${formatMoney(point.value)}` }));
      svg.append(dot);
    }
    return svg;
  }

  // --- what-if panel ---------------------------------------------------------

  private whatIfRequest(): WhatIfRequest {
    const o = this.state.overrides;
    const request: WhatIfRequest = {};
    if (this.state.parcelId) request.parcel_id = this.state.parcelId;
    if (o.householdSize !== undefined) request.household_size = o.householdSize;
    if (o.annualIncome !== undefined) request.annual_income = o.annualIncome;
    if (o.hasLien !== undefined) request.has_lien = o.hasLien;
    const attestations: Record<string, boolean> = {};
    if (o.tenureOneYear !== undefined) attestations.tenure_one_year = o.tenureOneYear;
    if (o.heirStatus !== undefined) attestations.heir_status = o.heirStatus;
    if (o.enrollmentWindow !== undefined)
      attestations.enrollment_window = o.enrollmentWindow;
    if (Object.keys(attestations).length) request.attestations = attestations;
    return request;
  }

  private async renderWhatIf(): Promise<void> {
    if (!this.state.parcelId) {
      this.root.append(el("p", { class: "hint" },
                          ["Pick a home in the Homes tab, or enter yours below."]));
      this.root.append(this.manualEntryForm());
      return;
    }
    let response: WhatIfResponse;
    try {
      response = await this.api.whatIf(this.whatIfRequest());
    } catch (error) {
      const fields = fieldErrors(error);
      if (!fields) throw error;
      // 422: show per-field messages inline, keep the form usable
      this.root.append(this.fieldErrorList(fields), this.whatIfForm());
      return;
    }
    const view = eligibilityView(response);
    this.root.append(this.whatIfForm(), this.eligibilityPanel(view));
  }

  private fieldErrorList(fields: { field: string; message: string }[]): HTMLElement {
    return el("ul", { class: "field-errors", role: "alert" },
              fields.map((f) => el("li", {}, [`${f.field}: ${f.message}`])));
  }

  private manualEntryForm(): HTMLElement {
    const fields: ManualFormFields = { neighborhood: "" };
    const form = el("form", { class: "whatif-form manual" });
    form.onsubmit = (event) => event.preventDefault();

    const select = el("select", { "aria-label": "Your neighborhood" });
    select.append(el("option", { value: "" }, ["Choose a neighborhood"]));
    for (const name of NEIGHBORHOODS) select.append(el("option", { value: name }, [name]));
    const bedrooms = el("input", { type: "number", min: "0", placeholder: "bedrooms" });
    const value = el("input", { type: "number", min: "1", placeholder: "assessed value ($)" });
    const rent = el("input", { type: "number", min: "1", placeholder: "monthly rent ($)" });
    const submit = el("button", { disabled: "" }, ["Check my home"]);

    const sync = () => {
      fields.neighborhood = (select as HTMLSelectElement).value;
      const read = (node: HTMLElement) => {
        const text = (node as HTMLInputElement).value;
        return text === "" ? undefined : Number(text);
      };
      fields.bedrooms = read(bedrooms);
      fields.baseValue = read(value);
      fields.monthlyRent = read(rent);
      if (manualFormValid(fields)) submit.removeAttribute("disabled");
      else submit.setAttribute("disabled", "");
    };
    for (const node of [select, bedrooms, value, rent]) node.onchange = sync;

    submit.onclick = async () => {
      const response = await this.api.whatIf({
        features: {
          neighborhood: fields.neighborhood,
          bedrooms: fields.bedrooms,
          base_value: fields.baseValue,
          monthly_rent: fields.monthlyRent,
        },
      });
      const old = this.root.querySelector(".eligibility");
      if (old) old.remove();
      this.root.append(this.eligibilityPanel(eligibilityView(response)));
    };

    form.append(
      el("label", {}, ["Neighborhood ", select]),
      el("label", {}, ["Bedrooms ", bedrooms]),
      el("label", {}, ["Assessed value ", value]),
      el("label", {}, ["Monthly rent ", rent]),
      submit,
    );
    return form;
  }

  private whatIfForm(): HTMLElement {
    const o = this.state.overrides;
    const form = el("form", { class: "whatif-form" });
    form.onsubmit = (event) => event.preventDefault();

    const lien = el("input", { type: "checkbox", id: "lien" });
    (lien as HTMLInputElement).checked = o.hasLien === true;
    lien.onchange = () =>
      this.updateOverrides({ hasLien: (lien as HTMLInputElement).checked });
    form.append(el("label", { class: "override", for: "lien" },
                   [lien, "There is a lien on my home"]));

    const size = el("input", {
      type: "number", min: "1", id: "size",
      value: o.householdSize !== undefined ? String(o.householdSize) : "",
      placeholder: "model estimate",
    });
    size.onchange = () => {
      const value = (size as HTMLInputElement).value;
      this.updateOverrides({ householdSize: value ? Number(value) : undefined });
    };
    form.append(el("label", { class: "override", for: "size" },
                   ["People in the household ", size]));

    const income = el("input", {
      type: "number", min: "0", id: "income",
      value: o.annualIncome !== undefined ? String(o.annualIncome) : "",
      placeholder: "model estimate",
    });
    income.onchange = () => {
      const value = (income as HTMLInputElement).value;
      this.updateOverrides({ annualIncome: value ? Number(value) : undefined });
    };
    form.append(el("label", { class: "override", for: "income" },
                   ["Yearly household income ($) ", income]));

    const clear = el("button", {}, ["Clear my answers"]);
    clear.onclick = () => this.update({ overrides: {} });
    form.append(clear);
    return form;
  }

  private eligibilityPanel(view: EligibilityView): HTMLElement {
    const panel = el("section", { class: "eligibility" });
    panel.append(el("p", {}, [
      el("span", { class: `badge large ${view.badge}` },
         [view.eligible ? "Likely eligible" : "Not eligible"]),
    ]));
    const list = el("ul", { class: "criteria" });
    for (const row of view.criteria) {
      list.append(el("li", { class: row.ok ? "ok" : "fail" }, [
        el("strong", {}, [`${row.ok ? "Yes" : "No"} - ${row.label}`]),
        el("small", {}, [` (${row.provenanceText})`]),
        el("p", { class: "explain" }, [row.explanation]),
      ]));
    }
    panel.append(list);
    if (view.chartSeries.length) {
      panel.append(el("h3", {}, ["Projected assessed value"]),
                   this.chart(view.chartSeries));
    }
    if (view.subsidyText !== null) {
      panel.append(el("p", {}, [
        `Estimated 7-year tax support if enrolled the whole time: `,
        el("strong", {}, [view.subsidyText]),
      ]));
    }
    return panel;
  }

  // --- scenario comparison -----------------------------------------------------

  private async renderScenarios(): Promise<void> {
    const note = el("p", { class: "hint" },
                    ["Program-wide cost under different assumptions (max 4 shown)."]);
    this.root.append(note);
    const results = [];
    for (const preset of SCENARIO_PRESETS.slice(0, 4)) {
      const { label, ...config } = preset;
      const response = await this.api.runScenario(config as Record<string, unknown>);
      results.push({ label, result: response.result! });
    }
    const cards = scenarioCards(results);
    const wrap = el("div", { class: "cards" });
    for (const card of cards) {
      wrap.append(el("article", { class: "card" }, [
        el("h3", {}, [card.label]),
        el("p", { class: "cost" }, [card.meanCostText]),
        el("p", {}, [card.eligibleText]),
        el("p", {}, [card.enrolledText]),
        this.chart(card.perYear),
      ]));
    }
    this.root.append(wrap);
  }
}

export function mountApp(api: ApiClient, mount: HTMLElement): void {
  const apply = (state: AppState) => {
    const hash = encodeState(state);
    if (window.location.hash !== hash)
      history.replaceState(null, "", hash || "#");
  };
  const boot = () => {
    const state = parseState(window.location.hash);
    const app = new App(api, state, apply, mount);
    void app.render(state);
  };
  window.addEventListener("hashchange", boot);
  boot();
}
