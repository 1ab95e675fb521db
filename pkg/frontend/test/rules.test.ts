import { describe, expect, it } from "vitest";
import { admissibleAfter, isAdmissible } from "../src/rules.js";
import { ENV_ACTIONS } from "../src/protocol.js";

describe("environment rule mirror", () => {
  it("allows everything after terrain actions", () => {
    for (const e of ["e_md", "e_hd", "e_mu", "e_hu"]) {
      expect(admissibleAfter(e)).toEqual([...ENV_ACTIONS]);
    }
  });

  it("forbids repeated high-ceiling cracks and emergencies after cracks", () => {
    expect(isAdmissible("e_tc_hc", "e_tc_hc")).toBe(false);
    expect(isAdmissible("e_tc_hc", "e_ha")).toBe(false);
    expect(isAdmissible("e_tc_hc", "e_np")).toBe(false);
    expect(isAdmissible("e_tc_hc", "e_md")).toBe(true);
    expect(isAdmissible("e_tc_nc", "e_tc_hc")).toBe(false);
    expect(isAdmissible("e_tc_nc", "e_tc_nc")).toBe(true);
  });

  it("forbids cracks right after a narrow passage", () => {
    expect(isAdmissible("e_np", "e_tc_nc")).toBe(false);
    expect(isAdmissible("e_np", "e_tc_hc")).toBe(false);
    expect(isAdmissible("e_np", "e_ha")).toBe(true);
  });
});
