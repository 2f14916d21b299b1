import { CockpitClient } from "./client";
import { DriverControls } from "./input";
import { drawOverlays, drawWorld } from "./render";
import { gaugeModel, viewportFor } from "./view";

const INPUT_SEND_HZ = 50; // upper bound on input messages

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function main(): void {
  const canvas = byId<HTMLCanvasElement>("world");
  const ctx = canvas.getContext("2d")!;
  const params = new URLSearchParams(location.search);
  const port = params.get("port") ?? "8800";
  const host = params.get("host") ?? location.hostname ?? "127.0.0.1";
  const url = `ws://${host || "127.0.0.1"}:${port}/cockpit`;
  byId<HTMLSpanElement>("endpoint").textContent = url;

  const client = new CockpitClient(url);
  client.connect();

  const controls = new DriverControls();
  window.addEventListener("keydown", (e: KeyboardEvent) => {
    controls.keyDown(e.code);
    if (["ArrowUp", "ArrowDown", "ArrowLeft", "ArrowRight", "Space"].includes(e.code)) {
      e.preventDefault();
    }
  });
  window.addEventListener("keyup", (e: KeyboardEvent) => controls.keyUp(e.code));
  byId<HTMLButtonElement>("estop").addEventListener("click", () =>
    controls.keyDown("Space"),
  );
  byId<HTMLButtonElement>("reset").addEventListener("click", () =>
    controls.keyDown("KeyR"),
  );

  let lastInputSent = 0;
  let lastTick = performance.now();

  const loop = (nowMs: number) => {
    const dt = Math.min(0.1, (nowMs - lastTick) / 1000);
    lastTick = nowMs;
    controls.tick(dt);

    const pads = navigator.getGamepads?.() ?? [];
    const gp = pads.find(Boolean);
    if (gp) {
      controls.applyGamepad({
        steer: gp.axes?.[0] ?? 0,
        throttle: gp.buttons?.[7]?.value ?? 0,
        brake: gp.buttons?.[6]?.value ?? 0,
      });
    }

    // inputs are rate-limited to 50 Hz and only flow while connected
    if (nowMs - lastInputSent >= 1000 / INPUT_SEND_HZ) {
      if (client.sendInput(controls.takeMessage())) lastInputSent = nowMs;
    }

    const frame = client.frames.latest();
    const connected = client.state === "connected";
    const stale = client.frames.isStale(nowMs);
    if (frame) {
      const vp = viewportFor(canvas.width, canvas.height, frame.ego.x, frame.ego.y);
      drawWorld(ctx, vp, frame, client.map);
      const gauges = gaugeModel(frame, controls.throttle, controls.brake);
      drawOverlays(ctx, vp, gauges, stale, connected);
      byId<HTMLSpanElement>("speed").textContent = String(gauges.speedKmh);
      byId<HTMLSpanElement>("steer").textContent = gauges.steerDeg.toFixed(1);
      byId<HTMLSpanElement>("throttle").textContent = String(gauges.throttlePct);
      byId<HTMLSpanElement>("brake").textContent = String(gauges.brakePct);
      byId<HTMLSpanElement>("mode").textContent = gauges.mode;
      byId<HTMLSpanElement>("eb").textContent = gauges.ebStatus;
      byId<HTMLSpanElement>("gap").textContent = gauges.gapText;
      byId<HTMLSpanElement>("laterr").textContent = gauges.lateralErrorText;
      byId<HTMLSpanElement>("signal").textContent = controls.turnSignal;
    } else {
      const vp = viewportFor(canvas.width, canvas.height, 0, 0);
      ctx.fillStyle = "#14161c";
      ctx.fillRect(0, 0, vp.width, vp.height);
      drawOverlays(
        ctx,
        vp,
        {
          speedKmh: 0, steerDeg: 0, throttlePct: 0, brakePct: 0, mode: "-",
          ebStatus: "-", gapText: "--", lateralErrorText: "--", emergencyOverlay: false,
        },
        stale,
        connected,
      );
    }
    byId<HTMLSpanElement>("conn").textContent = client.state;
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

window.addEventListener("load", main);
