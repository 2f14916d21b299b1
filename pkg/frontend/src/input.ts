import { sanitizeInput } from "./protocol";
import { DriverInputMsg } from "./types";

/**
 * Keyboard driving state. Arrows steer and pedal, space is the emergency
 * stop, R resets it, T cycles the turn signal. Axes ramp smoothly so keys
 * behave like pedals rather than switches; an attached gamepad overrides
 * the keyboard axes.
 */
export class DriverControls {
  private keys: Record<string, boolean> = {};
  steer = 0;
  throttle = 0;
  brake = 0;
  turnSignal: DriverInputMsg["turn_signal"] = "Off";
  private estopQueued = false;
  private resetQueued = false;

  keyDown(code: string): void {
    if (code === "Space") this.estopQueued = true;
    if (code === "KeyR") this.resetQueued = true;
    if (code === "KeyT") this.cycleTurnSignal();
    this.keys[code] = true;
  }

  keyUp(code: string): void {
    this.keys[code] = false;
  }

  private cycleTurnSignal(): void {
    const order: DriverInputMsg["turn_signal"][] = ["Off", "Left", "Right", "Hazard"];
    this.turnSignal = order[(order.indexOf(this.turnSignal) + 1) % order.length];
  }

  /** Advance the axis ramps by dt seconds of held keys. */
  tick(dt: number): void {
    const steerRate = 2.5; // full lock in 0.4 s
    const pedalRate = 3.0;
    const steerTarget =
      (this.keys["ArrowLeft"] ? 1 : 0) + (this.keys["ArrowRight"] ? -1 : 0);
    this.steer = approach(this.steer, steerTarget, steerRate * dt);
    this.throttle = approach(this.throttle, this.keys["ArrowUp"] ? 1 : 0, pedalRate * dt);
    this.brake = approach(this.brake, this.keys["ArrowDown"] ? 1 : 0, pedalRate * dt);
  }

  applyGamepad(axes: { steer?: number; throttle?: number; brake?: number }): void {
    if (axes.steer !== undefined) this.steer = -axes.steer; // stick right = steer right
    if (axes.throttle !== undefined) this.throttle = axes.throttle;
    if (axes.brake !== undefined) this.brake = axes.brake;
  }

  /** The message for this send cycle; one-shot buttons are consumed. */
  takeMessage(): DriverInputMsg {
    const msg = sanitizeInput({
      steer_axis: this.steer,
      throttle_axis: this.throttle,
      brake_axis: this.brake,
      turn_signal: this.turnSignal,
      estop: this.estopQueued,
      reset: this.resetQueued,
    });
    this.estopQueued = false;
    this.resetQueued = false;
    return msg;
  }
}

function approach(current: number, target: number, step: number): number {
  if (current < target) return Math.min(target, current + step);
  if (current > target) return Math.max(target, current - step);
  return current;
}
