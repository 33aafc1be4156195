/** One-key labeling shortcuts: R = relevant, I = irrelevant, S = skip.
 * Keystrokes are ignored while the user is typing in a form control.
 */

const IGNORED_TAGS = new Set(["INPUT", "TEXTAREA", "SELECT"]);

export interface KeyActions {
  relevant(): void;
  irrelevant(): void;
  skip(): void;
}

/** The slice of KeyboardEvent the handler needs; tests pass plain objects. */
export interface KeyEventLike {
  key: string;
  target?: { tagName?: string; isContentEditable?: boolean } | null;
  preventDefault?: () => void;
}

export interface KeyTargetLike {
  addEventListener(type: string, handler: (event: KeyEventLike) => void): void;
  removeEventListener(type: string, handler: (event: KeyEventLike) => void): void;
}

export function bindKeys(target: KeyTargetLike, actions: KeyActions): () => void {
  const handler = (event: KeyEventLike) => {
    const el = event.target;
    if (el && ((el.tagName && IGNORED_TAGS.has(el.tagName)) || el.isContentEditable)) {
      return;
    }
    switch (event.key.toLowerCase()) {
      case "r":
        event.preventDefault?.();
        actions.relevant();
        break;
      case "i":
        event.preventDefault?.();
        actions.irrelevant();
        break;
      case "s":
        event.preventDefault?.();
        actions.skip();
        break;
      default:
        break;
    }
  };
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
