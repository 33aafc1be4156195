import { describe, expect, it } from "vitest";

import { bindKeys, type KeyEventLike } from "../src/keyboard.js";

class FakeTarget {
  private handlers: Array<(event: KeyEventLike) => void> = [];

  addEventListener(_type: string, handler: (event: KeyEventLike) => void): void {
    this.handlers.push(handler);
  }

  removeEventListener(_type: string, handler: (event: KeyEventLike) => void): void {
    this.handlers = this.handlers.filter((h) => h !== handler);
  }

  press(key: string, target?: KeyEventLike["target"]): boolean {
    let prevented = false;
    for (const handler of this.handlers) {
      handler({ key, target, preventDefault: () => (prevented = true) });
    }
    return prevented;
  }
}

function setup() {
  const target = new FakeTarget();
  const calls: string[] = [];
  const unbind = bindKeys(target, {
    relevant: () => calls.push("+"),
    irrelevant: () => calls.push("-"),
    skip: () => calls.push("skip"),
  });
  return { target, calls, unbind };
}

describe("bindKeys", () => {
  it("maps R, I, S to relevant, irrelevant, skip", () => {
    const { target, calls } = setup();
    target.press("r");
    target.press("i");
    target.press("s");
    expect(calls).toEqual(["+", "-", "skip"]);
  });

  it("is case-insensitive and prevents the default action", () => {
    const { target, calls } = setup();
    expect(target.press("R")).toBe(true);
    expect(target.press("I")).toBe(true);
    expect(calls).toEqual(["+", "-"]);
  });

  it("ignores unrelated keys", () => {
    const { target, calls } = setup();
    expect(target.press("x")).toBe(false);
    expect(target.press("Enter")).toBe(false);
    expect(calls).toEqual([]);
  });

  it("ignores keystrokes while typing in form controls", () => {
    const { target, calls } = setup();
    target.press("r", { tagName: "INPUT" });
    target.press("r", { tagName: "TEXTAREA" });
    target.press("r", { tagName: "SELECT" });
    target.press("r", { tagName: "DIV", isContentEditable: true });
    expect(calls).toEqual([]);
    target.press("r", { tagName: "DIV" });
    expect(calls).toEqual(["+"]);
  });

  it("stops dispatching after unbind", () => {
    const { target, calls, unbind } = setup();
    target.press("r");
    unbind();
    target.press("r");
    expect(calls).toEqual(["+"]);
  });
});
